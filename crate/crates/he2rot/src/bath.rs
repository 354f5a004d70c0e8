//! He II thermodynamic property tables and bath-coupling models.
//!
//! Decoherence of the (1,3) rotational coherence is modeled kinematically:
//! LD(t,T) = LD⁰·exp[−N_n·σ·u₁·t] with the colliding-atom density N_n either
//! the equilibrium normal-fluid density N·(ρₙ/ρ)(T), or a non-equilibrium
//! Gaussian second-sound pulse N·exp[−(u₂t/w)²] launched by the kick. For
//! the latter, the substitution into the rate can be read literally
//! (instantaneous rate × t) or integrated over the history; both variants
//! are provided and coincide at t = 0 and as w → ∞.
//!
//! Note the non-equilibrium model deliberately starts from the *total*
//! density in the normal phase at time zero, even below T_λ — the bath is
//! locally hot right after the kick. The annihilation model uses the decay
//! N(t) = N₀/[1 + K(T)N₀t] with K(T) inversely proportional to the thermal
//! roton density √T·exp(−Δ(T)/T).

use std::path::Path;

use crate::error::{Error, Result};

/// One row of the property table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathRecord {
    pub t_k: f64,
    /// Total atom number density, cm⁻³.
    pub density_cm3: f64,
    /// Normal-fluid fraction ρₙ/ρ.
    pub normal_fraction: f64,
    /// First-sound speed, m/s.
    pub u1_mps: f64,
    /// Second-sound speed, m/s.
    pub u2_mps: f64,
    /// Roton gap Δ/k_B, K.
    pub roton_gap_k: f64,
}

// Fritsch–Carlson monotone cubic slopes: no overshoot outside neighboring
// knot values, monotone where the data are.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = y
        .windows(2)
        .zip(&h)
        .map(|(w, &h)| (w[1] - w[0]) / h)
        .collect();
    let mut m = vec![0.0; n];
    m[0] = end_slope(h[0], h[1], d[0], d[1]);
    m[n - 1] = end_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    for i in 1..n - 1 {
        if d[i - 1] * d[i] <= 0.0 {
            m[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    m
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 < 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

fn pchip_eval(x: &[f64], y: &[f64], m: &[f64], xq: f64) -> f64 {
    let i = match x.binary_search_by(|v| v.total_cmp(&xq)) {
        Ok(i) => return y[i],
        Err(i) => i.clamp(1, x.len() - 1) - 1,
    };
    let h = x[i + 1] - x[i];
    let s = (xq - x[i]) / h;
    let (s2, s3) = (s * s, s * s * s);
    y[i] * (2.0 * s3 - 3.0 * s2 + 1.0)
        + m[i] * h * (s3 - 2.0 * s2 + s)
        + y[i + 1] * (-2.0 * s3 + 3.0 * s2)
        + m[i + 1] * h * (s3 - s2)
}

/// Tabulated He II properties with monotone-cubic interpolation and no
/// extrapolation.
#[derive(Debug, Clone)]
pub struct BathTable {
    rows: Vec<BathRecord>,
    t: Vec<f64>,
    cols: [Vec<f64>; 5],
    slopes: [Vec<f64>; 5],
}

impl BathTable {
    pub fn new(rows: Vec<BathRecord>) -> Result<Self> {
        if rows.len() < 4 {
            return Err(Error::InvalidInput(format!(
                "bath table needs at least 4 rows, got {}",
                rows.len()
            )));
        }
        for (i, w) in rows.windows(2).enumerate() {
            if w[1].t_k <= w[0].t_k {
                return Err(Error::InvalidInput(format!(
                    "bath table temperature grid not strictly increasing at row {}",
                    i + 2
                )));
            }
        }
        for (i, r) in rows.iter().enumerate() {
            let vals = [r.t_k, r.density_cm3, r.normal_fraction, r.u1_mps, r.u2_mps, r.roton_gap_k];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "non-finite bath table entry at row {}",
                    i + 1
                )));
            }
            if r.density_cm3 <= 0.0 || r.u1_mps <= 0.0 || r.u2_mps <= 0.0 || r.roton_gap_k <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "non-positive bath property at row {}",
                    i + 1
                )));
            }
            if !(0.0..=1.0).contains(&r.normal_fraction) {
                return Err(Error::InvalidInput(format!(
                    "normal_fraction outside [0,1] at row {}",
                    i + 1
                )));
            }
        }
        let t: Vec<f64> = rows.iter().map(|r| r.t_k).collect();
        let cols = [
            rows.iter().map(|r| r.density_cm3).collect::<Vec<_>>(),
            rows.iter().map(|r| r.normal_fraction).collect(),
            rows.iter().map(|r| r.u1_mps).collect(),
            rows.iter().map(|r| r.u2_mps).collect(),
            rows.iter().map(|r| r.roton_gap_k).collect(),
        ];
        let slopes = [
            pchip_slopes(&t, &cols[0]),
            pchip_slopes(&t, &cols[1]),
            pchip_slopes(&t, &cols[2]),
            pchip_slopes(&t, &cols[3]),
            pchip_slopes(&t, &cols[4]),
        ];
        Ok(BathTable {
            rows,
            t,
            cols,
            slopes,
        })
    }

    /// Parse the shipped CSV format: `#` comment lines, a mandatory header
    /// `T_K,density_cm3,normal_fraction,u1_mps,u2_mps,roton_gap_K`, then rows.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut rows = Vec::new();
        let mut header_seen = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let n = lineno as u64 + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                let expect = "T_K,density_cm3,normal_fraction,u1_mps,u2_mps,roton_gap_K";
                if line != expect {
                    return Err(Error::CsvParse {
                        path: path.to_path_buf(),
                        line: n,
                        message: format!("expected header `{expect}`, got `{line}`"),
                    });
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::CsvParse {
                    path: path.to_path_buf(),
                    line: n,
                    message: format!("expected 6 fields, got {}", fields.len()),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|e| Error::CsvParse {
                    path: path.to_path_buf(),
                    line: n,
                    message: format!("bad number `{s}`: {e}"),
                })
            };
            rows.push(BathRecord {
                t_k: parse(fields[0])?,
                density_cm3: parse(fields[1])?,
                normal_fraction: parse(fields[2])?,
                u1_mps: parse(fields[3])?,
                u2_mps: parse(fields[4])?,
                roton_gap_k: parse(fields[5])?,
            });
        }
        if !header_seen {
            return Err(Error::CsvParse {
                path: path.to_path_buf(),
                line: 0,
                message: "missing header".into(),
            });
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[BathRecord] {
        &self.rows
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    /// Monotone-safe interpolation; exact at grid points, rejecting any
    /// temperature outside the table.
    pub fn interpolate(&self, t_k: f64) -> Result<BathRecord> {
        let (lo, hi) = self.t_range();
        if !(lo..=hi).contains(&t_k) {
            return Err(Error::TemperatureRange { t_k, lo, hi });
        }
        let v = |c: usize| pchip_eval(&self.t, &self.cols[c], &self.slopes[c], t_k);
        Ok(BathRecord {
            t_k,
            density_cm3: v(0),
            normal_fraction: v(1),
            u1_mps: v(2),
            u2_mps: v(3),
            roton_gap_k: v(4),
        })
    }

    /// Soft physics checks for the validate command; returns one message per
    /// violated invariant (empty = pass).
    pub fn check_invariants(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let (lo, hi) = self.t_range();
        if lo > 1.3 || hi < 2.17 {
            issues.push(format!(
                "table covers [{lo}, {hi}] K; needs at least [1.3, 2.17] K"
            ));
        }
        for (i, w) in self.rows.windows(2).enumerate() {
            if w[1].normal_fraction < w[0].normal_fraction {
                issues.push(format!(
                    "normal_fraction not monotone non-decreasing at row {}",
                    i + 2
                ));
                break;
            }
        }
        // u2 maximum located by dense scan
        let mut t_best = lo;
        let mut u_best = f64::MIN;
        let mut t = lo;
        while t <= hi {
            let u = self.interpolate(t).map(|r| r.u2_mps).unwrap_or(f64::MIN);
            if u > u_best {
                u_best = u;
                t_best = t;
            }
            t += 0.001;
        }
        if !(1.4 < t_best && t_best < 1.8) {
            issues.push(format!(
                "second-sound maximum at {t_best:.3} K, expected inside (1.4, 1.8) K"
            ));
        }
        issues
    }

    /// Temperature of the second-sound maximum (dense scan).
    pub fn u2_max_temperature(&self) -> f64 {
        let (lo, hi) = self.t_range();
        let mut t_best = lo;
        let mut u_best = f64::MIN;
        let mut t = lo;
        while t <= hi {
            if let Ok(r) = self.interpolate(t) {
                if r.u2_mps > u_best {
                    u_best = r.u2_mps;
                    t_best = t;
                }
            }
            t += 0.001;
        }
        t_best
    }
}

/// Decoherence model selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoherenceModel {
    Equilibrium,
    NonEquilibriumLiteral,
    NonEquilibriumIntegrated,
}

impl std::str::FromStr for DecoherenceModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equilibrium" => Ok(Self::Equilibrium),
            "nonequilibrium-literal" | "literal" => Ok(Self::NonEquilibriumLiteral),
            "nonequilibrium-integrated" | "integrated" => Ok(Self::NonEquilibriumIntegrated),
            other => Err(Error::UnknownVariant(other.to_string())),
        }
    }
}

/// Decoherence parameters: cross-section σ (Å²) and second-sound pulse
/// width w (nm).
#[derive(Debug, Clone, Copy)]
pub struct DecoherenceParams {
    pub sigma_a2: f64,
    pub w_nm: f64,
    pub model: DecoherenceModel,
}

// (cm^-3) * (A^2 -> cm^2) * (m/s -> cm/s) / 1e9 => GHz
const RATE_TO_GHZ: f64 = 1e-16 * 1e2 / 1e9;

/// Equilibrium kinematic decoherence rate γ(T) = N·(ρₙ/ρ)·σ·u₁, GHz.
pub fn gamma_equilibrium(table: &BathTable, t_k: f64, sigma_a2: f64) -> Result<f64> {
    if sigma_a2 < 0.0 {
        return Err(Error::InvalidInput("cross-section must be non-negative".into()));
    }
    let r = table.interpolate(t_k)?;
    Ok(r.density_cm3 * r.normal_fraction * sigma_a2 * r.u1_mps * RATE_TO_GHZ)
}

/// Instantaneous rate with the *full* density in the normal phase, GHz.
pub fn gamma_full_density(table: &BathTable, t_k: f64, sigma_a2: f64) -> Result<f64> {
    let r = table.interpolate(t_k)?;
    Ok(r.density_cm3 * sigma_a2 * r.u1_mps * RATE_TO_GHZ)
}

/// LD amplitude under the equilibrium model at delay t.
pub fn ld_equilibrium(
    table: &BathTable,
    t_k: f64,
    t_ps: f64,
    sigma_a2: f64,
    ld0: f64,
) -> Result<f64> {
    if t_ps < 0.0 {
        return Err(Error::InvalidInput("delay must be non-negative".into()));
    }
    let gamma = gamma_equilibrium(table, t_k, sigma_a2)?;
    Ok(ld0 * (-gamma * t_ps * 1e-3).exp())
}

/// Non-equilibrium normal density at the molecule: N·exp[−(u₂t/w)²], cm⁻³.
pub fn n_neq(table: &BathTable, t_k: f64, t_ps: f64, w_nm: f64) -> Result<f64> {
    if t_ps < 0.0 || w_nm <= 0.0 {
        return Err(Error::InvalidInput(
            "delay must be non-negative and pulse width positive".into(),
        ));
    }
    let r = table.interpolate(t_k)?;
    let x = r.u2_mps * t_ps * 1e-3 / w_nm; // u2 in nm/ps is u2_mps * 1e-3
    Ok(r.density_cm3 * (-x * x).exp())
}

/// LD amplitude under the second-sound (non-equilibrium) model.
///
/// `Literal` reads the substitution at face value, exp[−n(t)·σ·u₁·t];
/// `Integrated` accumulates the rate history, exp[−σ·u₁·∫₀ᵗ n(t′)dt′],
/// which has the closed form (√π/2)·(w/u₂)·erf(u₂t/w) for the Gaussian
/// pulse. `Equilibrium` falls back to [`ld_equilibrium`].
pub fn ld_nonequilibrium(
    table: &BathTable,
    t_k: f64,
    t_ps: f64,
    params: &DecoherenceParams,
    ld0: f64,
) -> Result<f64> {
    if t_ps < 0.0 {
        return Err(Error::InvalidInput("delay must be non-negative".into()));
    }
    match params.model {
        DecoherenceModel::Equilibrium => {
            ld_equilibrium(table, t_k, t_ps, params.sigma_a2, ld0)
        }
        DecoherenceModel::NonEquilibriumLiteral => {
            let n = n_neq(table, t_k, t_ps, params.w_nm)?;
            let r = table.interpolate(t_k)?;
            let gamma_ghz = n * params.sigma_a2 * r.u1_mps * RATE_TO_GHZ;
            Ok(ld0 * (-gamma_ghz * t_ps * 1e-3).exp())
        }
        DecoherenceModel::NonEquilibriumIntegrated => {
            let r = table.interpolate(t_k)?;
            let gamma_full_ghz = r.density_cm3 * params.sigma_a2 * r.u1_mps * RATE_TO_GHZ;
            let u2_nm_ps = r.u2_mps * 1e-3;
            let x = u2_nm_ps * t_ps / params.w_nm;
            let tau_char_ps = params.w_nm / u2_nm_ps;
            let integral_ps = 0.5 * std::f64::consts::PI.sqrt() * tau_char_ps * libm::erf(x);
            Ok(ld0 * (-gamma_full_ghz * 1e-3 * integral_ps).exp())
        }
    }
}

/// Bimolecular annihilation parameters.
#[derive(Debug, Clone, Copy)]
pub struct AnnihilationParams {
    /// Initial molecular number density, cm⁻³.
    pub n0_cm3: f64,
    /// Rate constant at the reference temperature, cm³/s.
    pub k_ref_cm3_s: f64,
    pub t_ref_k: f64,
}

/// Thermal roton density up to a constant factor: √T·exp(−Δ(T)/T).
pub fn roton_density_rel(table: &BathTable, t_k: f64) -> Result<f64> {
    let r = table.interpolate(t_k)?;
    Ok(t_k.sqrt() * (-r.roton_gap_k / t_k).exp())
}

/// Roton-limited annihilation rate constant K(T), cm³/s. Diffusion slows as
/// the roton density grows, so K scales inversely with it.
pub fn annihilation_rate(table: &BathTable, t_k: f64, params: &AnnihilationParams) -> Result<f64> {
    if params.n0_cm3 <= 0.0 || params.k_ref_cm3_s <= 0.0 {
        return Err(Error::InvalidInput(
            "annihilation parameters must be positive".into(),
        ));
    }
    let n_ref = roton_density_rel(table, params.t_ref_k)?;
    let n_t = roton_density_rel(table, t_k)?;
    Ok(params.k_ref_cm3_s * n_ref / n_t)
}

/// Surviving molecular density N(t) = N₀/[1 + K(T)N₀t], cm⁻³.
pub fn bimolecular_density(
    table: &BathTable,
    t_s: f64,
    t_k: f64,
    params: &AnnihilationParams,
) -> Result<f64> {
    if t_s < 0.0 {
        return Err(Error::InvalidInput("time must be non-negative".into()));
    }
    let k = annihilation_rate(table, t_k, params)?;
    Ok(params.n0_cm3 / (1.0 + k * params.n0_cm3 * t_s))
}

/// Mean inter-molecular separation density^(−1/3) and 3-D rms diffusion
/// displacement √(6Dt), both in nm.
pub fn separation_and_displacement(density_cm3: f64, d_cm2_s: f64, t_s: f64) -> Result<(f64, f64)> {
    if density_cm3 <= 0.0 || d_cm2_s < 0.0 || t_s < 0.0 {
        return Err(Error::InvalidInput(
            "density must be positive; D and t non-negative".into(),
        ));
    }
    let sep_nm = density_cm3.powf(-1.0 / 3.0) * 1e7;
    let disp_nm = (6.0 * d_cm2_s * t_s).sqrt() * 1e7;
    Ok((sep_nm, disp_nm))
}
