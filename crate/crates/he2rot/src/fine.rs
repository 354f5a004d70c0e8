//! Spin-rotation and spin-spin fine structure of the ³Σ rotational levels.
//!
//! Each rotational level N ≥ 1 splits into three J = {N−1, N, N+1} fine
//! levels. The effective Hamiltonian is the standard two-parameter form for
//! a ³Σ state, H = B·N² + γ·N·S + (2/3)λ·(3Sz² − S²), evaluated in the
//! Hund's case (b) basis:
//!
//! * N·S is diagonal, ⟨N,J|N·S|N,J⟩ = [J(J+1) − N(N+1) − 2]/2 for S = 1;
//! * the spin-spin term is diagonal in J and mixes N = J ∓ 1:
//!   ⟨J−1|= −(2λ/3)(J−1)/(2J+1), ⟨J+1|= −(2λ/3)(J+2)/(2J+1),
//!   ⟨J−1|…|J+1⟩ = 2λ√(J(J+1))/(2J+1), and ⟨N=J| = +2λ/3.
//!
//! Both a closed-form branch solution (the exact 2×2 eigenvalues) and a
//! numerical diagonalization path are provided; they must agree to well
//! below the GHz scale of the splittings.
//!
//! Two-photon absorption obeys ΔJ = 0, ±2, so the (N, N+2) coherence is
//! observed through every (J₁, J₂) pair reachable via a shared intermediate
//! level; for (1,3) these are the five pairs (0,2), (0,4), (1,3), (2,2),
//! (2,4). The pair weights cᵏ are free fit parameters throughout.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::rotor::MoleculeConstants;

/// One spin-split rotational level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineLevel {
    pub n: u32,
    pub j: u32,
    /// Energy offset from the rigid-rotor level B·N(N+1), GHz.
    pub offset_ghz: f64,
}

/// A two-photon-allowed (J₁, J₂) coherence pair between N and N+2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitionPair {
    pub j1: u32,
    pub j2: u32,
}

/// A beat component of the LD signal: one (J₁, J₂) pair with its frequency
/// and (free-parameter) weight.
#[derive(Debug, Clone, Copy)]
pub struct BeatLine {
    pub pair: TransitionPair,
    pub frequency_thz: f64,
    pub weight: f64,
}

fn check_odd_n(n: u32) -> Result<()> {
    if n == 0 || n % 2 == 0 {
        return Err(Error::InvalidInput(format!(
            "fine structure requested for N = {n}: the odd-parity manifold has odd N >= 1"
        )));
    }
    Ok(())
}

// Matrix elements of the fine-structure Hamiltonian within one J block.
// Rows are N = J-1 ("lower") and N = J+1 ("upper"); energies in GHz.

fn sr_diag(n: u32, j: u32, gamma: f64) -> f64 {
    let nf = n as f64;
    let jf = j as f64;
    gamma / 2.0 * (jf * (jf + 1.0) - nf * (nf + 1.0) - 2.0)
}

fn ss_diag_lower(j: u32, lambda: f64) -> f64 {
    let jf = j as f64;
    -(2.0 * lambda / 3.0) * (jf - 1.0) / (2.0 * jf + 1.0)
}

fn ss_diag_upper(j: u32, lambda: f64) -> f64 {
    let jf = j as f64;
    -(2.0 * lambda / 3.0) * (jf + 2.0) / (2.0 * jf + 1.0)
}

fn ss_off(j: u32, lambda: f64) -> f64 {
    let jf = j as f64;
    2.0 * lambda * (jf * (jf + 1.0)).sqrt() / (2.0 * jf + 1.0)
}

fn rigid(n: u32, b_ghz: f64) -> f64 {
    b_ghz * (n * (n + 1)) as f64
}

/// Elements of the J block containing N = j−1 and N = j+1 (GHz).
/// Returns (E_lower_diag, E_upper_diag, off_diagonal); the lower row is
/// absent when j = 0.
fn j_block(j: u32, b_ghz: f64, lambda: f64, gamma: f64) -> (Option<f64>, f64, f64) {
    let upper = rigid(j + 1, b_ghz) + ss_diag_upper(j, lambda) + sr_diag(j + 1, j, gamma);
    if j == 0 {
        (None, upper, 0.0)
    } else {
        let lower = rigid(j - 1, b_ghz) + ss_diag_lower(j, lambda) + sr_diag(j - 1, j, gamma);
        (Some(lower), upper, ss_off(j, lambda))
    }
}

/// The three fine levels of rotational state N, by the closed-form branch
/// expressions (exact eigenvalues of the 1×1/2×2 J blocks).
pub fn fine_levels(n: u32, constants: &MoleculeConstants) -> Result<[FineLevel; 3]> {
    check_odd_n(n)?;
    let b_ghz = constants.b_v_thz[0] * 1e3;
    let lambda = constants.lambda_ss_ghz;
    let gamma = constants.gamma_sr_ghz;
    let e0 = rigid(n, b_ghz);

    // J = N: unmixed
    let e_j_eq_n = 2.0 * lambda / 3.0 - gamma;

    // J = N + 1: our state is the lower (N = J-1) row of block J = N+1
    let j_up = n + 1;
    let (lo, up, v) = j_block(j_up, b_ghz, lambda, gamma);
    let lo = lo.expect("J = N+1 >= 2 always has a lower row");
    let mean = (lo + up) / 2.0;
    let half = (lo - up) / 2.0;
    let e_j_up = mean - (half * half + v * v).sqrt() - e0;

    // J = N - 1: our state is the upper (N = J+1) row of block J = N-1
    let j_dn = n - 1;
    let (lo, up, v) = j_block(j_dn, b_ghz, lambda, gamma);
    let e_j_dn = match lo {
        None => up - e0,
        Some(lo) => {
            let mean = (lo + up) / 2.0;
            let half = (lo - up) / 2.0;
            mean + (half * half + v * v).sqrt() - e0
        }
    };

    Ok([
        FineLevel {
            n,
            j: j_dn,
            offset_ghz: e_j_dn,
        },
        FineLevel {
            n,
            j: n,
            offset_ghz: e_j_eq_n,
        },
        FineLevel {
            n,
            j: j_up,
            offset_ghz: e_j_up,
        },
    ])
}

/// The same three levels by direct numerical diagonalization of the J
/// blocks; the independent check on the closed forms.
pub fn fine_levels_diagonalized(n: u32, constants: &MoleculeConstants) -> Result<[FineLevel; 3]> {
    check_odd_n(n)?;
    let b_ghz = constants.b_v_thz[0] * 1e3;
    let lambda = constants.lambda_ss_ghz;
    let gamma = constants.gamma_sr_ghz;
    let e0 = rigid(n, b_ghz);

    let mut levels = Vec::with_capacity(3);
    for j in (n - 1)..=(n + 1) {
        if j == n {
            levels.push(FineLevel {
                n,
                j,
                offset_ghz: 2.0 * lambda / 3.0 - gamma,
            });
            continue;
        }
        let (lo, up, v) = j_block(j, b_ghz, lambda, gamma);
        let offset = match lo {
            None => up - e0,
            Some(lo) => {
                let m = Matrix2::new(lo, v, v, up);
                let eig = m.symmetric_eigen();
                // pick the eigenvalue whose eigenvector is dominated by our N row:
                // row 0 is N = j-1, row 1 is N = j+1
                let our_row = if n == j - 1 { 0 } else { 1 };
                let k = if eig.eigenvectors[(our_row, 0)].abs()
                    >= eig.eigenvectors[(our_row, 1)].abs()
                {
                    0
                } else {
                    1
                };
                eig.eigenvalues[k] - e0
            }
        };
        levels.push(FineLevel {
            n,
            j,
            offset_ghz: offset,
        });
    }
    Ok([levels[0], levels[1], levels[2]])
}

/// Whether (j1, j2) is reachable by two two-photon steps with ΔJ ∈ {0, ±2}
/// that share an intermediate-manifold level.
fn reachable(j1: u32, j2: u32) -> bool {
    let steps = |j: u32| -> Vec<i64> {
        let j = j as i64;
        [j - 2, j, j + 2].into_iter().filter(|&x| x >= 0).collect()
    };
    steps(j1).iter().any(|a| steps(j2).contains(a))
}

/// Enumerate the two-photon-allowed (J₁, J₂) pairs between N₁ and N₂ = N₁+2.
pub fn allowed_pairs(n1: u32, n2: u32) -> Result<Vec<TransitionPair>> {
    check_odd_n(n1)?;
    if n2 != n1 + 2 {
        return Err(Error::InvalidInput(format!(
            "coherence pairs are defined for N2 = N1 + 2; got ({n1}, {n2})"
        )));
    }
    let j_range = |n: u32| (n - 1)..=(n + 1);
    let mut pairs = Vec::new();
    for j1 in j_range(n1) {
        for j2 in j_range(n2) {
            if reachable(j1, j2) {
                pairs.push(TransitionPair { j1, j2 });
            }
        }
    }
    Ok(pairs)
}

/// Beat frequencies νᵏ = [E(N₂,J₂) − E(N₁,J₁)]/h in THz for the given pairs.
pub fn beat_frequencies(
    pairs: &[TransitionPair],
    lo: &[FineLevel; 3],
    hi: &[FineLevel; 3],
    b_thz: f64,
) -> Result<Vec<f64>> {
    let n1 = lo[0].n;
    let n2 = hi[0].n;
    let center = b_thz * ((n2 * (n2 + 1)) as f64 - (n1 * (n1 + 1)) as f64);
    pairs
        .iter()
        .map(|p| {
            let o1 = lo
                .iter()
                .find(|l| l.j == p.j1)
                .ok_or_else(|| {
                    Error::InvalidInput(format!("pair J1 = {} not in the N = {n1} level set", p.j1))
                })?
                .offset_ghz;
            let o2 = hi
                .iter()
                .find(|l| l.j == p.j2)
                .ok_or_else(|| {
                    Error::InvalidInput(format!("pair J2 = {} not in the N = {n2} level set", p.j2))
                })?
                .offset_ghz;
            Ok(center + (o2 - o1) * 1e-3)
        })
        .collect()
}

/// Assemble the beat lines of the (N, N+2) coherence for vibrational level
/// `v`: allowed pairs, their frequencies from the fine structure, and the
/// supplied weights (free parameters; must match the pair count).
pub fn beat_lines(
    constants: &MoleculeConstants,
    v: usize,
    n1: u32,
    weights: &[f64],
) -> Result<Vec<BeatLine>> {
    let b_thz = constants
        .b_thz(v)
        .ok_or_else(|| Error::InvalidInput(format!("no rotational constant for v = {v}")))?;
    let pairs = allowed_pairs(n1, n1 + 2)?;
    if weights.len() != pairs.len() {
        return Err(Error::InvalidInput(format!(
            "{} weights supplied for {} transition pairs",
            weights.len(),
            pairs.len()
        )));
    }
    let lo = fine_levels(n1, constants)?;
    let hi = fine_levels(n1 + 2, constants)?;
    let freqs = beat_frequencies(&pairs, &lo, &hi, b_thz)?;
    Ok(pairs
        .iter()
        .zip(freqs.iter().zip(weights))
        .map(|(&pair, (&frequency_thz, &weight))| BeatLine {
            pair,
            frequency_thz,
            weight,
        })
        .collect())
}

/// Total span of the three fine levels of N, GHz (used by the validate
/// command's sanity check against the ~2 GHz scale).
pub fn splitting_span_ghz(n: u32, constants: &MoleculeConstants) -> Result<f64> {
    let levels = fine_levels(n, constants)?;
    let max = levels.iter().map(|l| l.offset_ghz).fold(f64::MIN, f64::max);
    let min = levels.iter().map(|l| l.offset_ghz).fold(f64::MAX, f64::min);
    Ok(max - min)
}
