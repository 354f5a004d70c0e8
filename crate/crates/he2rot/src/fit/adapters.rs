//! Model adapters for the four standard fits: spin-beat decay, temperature
//! decoherence, kick-energy ratio, and bimolecular density, plus the
//! ro-vibrational branch-weight fit of the LD₁,₃ spectral multiplet.

use num_complex::Complex64;

use crate::bath::{
    bimolecular_density, AnnihilationParams, BathTable, DecoherenceModel, DecoherenceParams,
};
use crate::error::{Error, Result};
use crate::fine::beat_lines;
use crate::fit::{least_squares, FitConfig, FitProblem, FitResult, Parameter};
use crate::rotor::{ld_amplitude_ratio, InitialMixture, KickCalibration, KickOperator, MoleculeConstants};
use crate::signal::{
    fourier_spectrum, synthesize_ld, AmplitudeSeries, BeatComponent, SpectrumOptions, TimeGrid,
};

/// Envelope of the multi-frequency beat at the detuning frequencies
/// `delta_thz` (relative to the line center): |Σₖ cᵏ e^{2πiδᵏt}|·e^{−t/τ}.
/// Parameter layout: [tau_ns, c₁ … cₖ].
fn envelope_model(delta_thz: Vec<f64>) -> impl Fn(&[f64], &[f64], &mut [f64]) -> Result<()> + Sync {
    move |p: &[f64], x: &[f64], out: &mut [f64]| {
        let tau_ps = p[0] * 1e3;
        for (o, &t) in out.iter_mut().zip(x) {
            let mut s = Complex64::new(0.0, 0.0);
            for (k, &d) in delta_thz.iter().enumerate() {
                let phase = 2.0 * std::f64::consts::PI * d * t;
                s += p[k + 1] * Complex64::new(phase.cos(), phase.sin());
            }
            *o = s.norm() * (-t / tau_ps).exp();
        }
        Ok(())
    }
}

/// Spin-beat fit outcome: decay time and the five pair weights.
#[derive(Debug, Clone)]
pub struct SpinBeatFit {
    pub tau_ns: f64,
    pub tau_err_ns: f64,
    pub weights: Vec<f64>,
    pub weight_errs: Vec<f64>,
    /// Effective rotational linewidth 1/(π τ), GHz.
    pub linewidth_ghz: f64,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
    pub curvature_ok: bool,
}

/// Fit the sliding-window amplitude series of one rotational line to the
/// multi-frequency beat envelope with a single decay constant.
///
/// `beat_freqs_thz` are the fine-structure beat frequencies of the line
/// (fixed by the molecular constants); the weights cᵏ and τ are free. The
/// weights are reported with the sign convention Σcᵏ > 0.
pub fn fit_spin_beating(
    series: &AmplitudeSeries,
    beat_freqs_thz: &[f64],
    cfg: &FitConfig,
) -> Result<SpinBeatFit> {
    if series.t_ps.len() != series.amplitude.len() || series.t_ps.is_empty() {
        return Err(Error::InvalidInput("empty or ragged amplitude series".into()));
    }
    let span_ps = series.t_ps.last().unwrap() - series.t_ps[0];
    let max_a = series.amplitude.iter().fold(0.0f64, |a, &b| a.max(b));
    let min_a = series.amplitude.iter().fold(f64::MAX, |a, &b| a.min(b));
    if max_a <= 0.0 || (max_a - min_a) < 1e-9 * max_a {
        return Err(Error::NonIdentifiable(
            "amplitude series is constant; beat structure and decay are invisible".into(),
        ));
    }
    if beat_freqs_thz.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least two beat frequencies".into(),
        ));
    }
    // one full envelope oscillation = one period of the smallest detuning split
    let center = beat_freqs_thz.iter().sum::<f64>() / beat_freqs_thz.len() as f64;
    let delta: Vec<f64> = beat_freqs_thz.iter().map(|f| f - center).collect();
    let spread = delta.iter().fold(0.0f64, |a, &b| a.max(b))
        - delta.iter().fold(0.0f64, |a, &b| a.min(b));
    if span_ps * spread < 1.0 {
        return Err(Error::NonIdentifiable(format!(
            "series spans {span_ps} ps < one envelope oscillation of the {spread} THz beat spread"
        )));
    }

    let mut params = vec![Parameter::free("tau_ns", 0.8, 0.05, 20.0)];
    for k in 0..beat_freqs_thz.len() {
        params.push(Parameter::free(format!("c{}", k + 1), 0.3, -2.0, 2.0));
    }
    let problem = FitProblem::new(
        envelope_model(delta),
        series.t_ps.clone(),
        series.amplitude.clone(),
        params,
    )?;
    let result = least_squares(&problem, cfg)?;

    let mut weights: Vec<f64> = result.values[1..].to_vec();
    let mut weight_errs: Vec<f64> = result.uncertainties[1..].to_vec();
    if weights.iter().sum::<f64>() < 0.0 {
        for w in &mut weights {
            *w = -*w;
        }
    }
    weight_errs.iter_mut().for_each(|e| *e = e.abs());
    let tau_ns = result.values[0];
    Ok(SpinBeatFit {
        tau_ns,
        tau_err_ns: result.uncertainties[0],
        weights,
        weight_errs,
        linewidth_ghz: 1.0 / (std::f64::consts::PI * tau_ns),
        residual_rms: result.residual_rms,
        converged: result.converged,
        iterations: result.iterations,
        curvature_ok: result.curvature_ok,
    })
}

/// Temperature-decoherence fit outcome.
#[derive(Debug, Clone)]
pub struct TemperatureFit {
    pub model: DecoherenceModel,
    pub sigma_a2: f64,
    pub sigma_err_a2: f64,
    /// Second-sound pulse width; None for the equilibrium model.
    pub w_nm: Option<f64>,
    pub w_err_nm: Option<f64>,
    pub ld0: f64,
    pub residual_rms: f64,
    pub converged: bool,
    pub curvature_ok: bool,
}

/// Fit LD(T) at a fixed kick-probe delay to the chosen decoherence model.
/// The equilibrium model fits σ only; the non-equilibrium variants fit
/// (σ, w). The overall amplitude LD⁰ is fixed at 1 unless `free_scale`.
pub fn fit_temperature(
    data: &[(f64, f64)],
    t_fixed_ps: f64,
    model: DecoherenceModel,
    table: &BathTable,
    free_scale: bool,
    cfg: &FitConfig,
) -> Result<TemperatureFit> {
    if t_fixed_ps <= 0.0 {
        return Err(Error::InvalidInput("fixed delay must be positive".into()));
    }
    for &(t_k, _) in data {
        table.interpolate(t_k)?; // fail early on range violations
    }
    let x: Vec<f64> = data.iter().map(|d| d.0).collect();
    let y: Vec<f64> = data.iter().map(|d| d.1).collect();

    let table = table.clone();
    let model_fn = move |p: &[f64], x: &[f64], out: &mut [f64]| -> Result<()> {
        let params = DecoherenceParams {
            sigma_a2: p[0],
            w_nm: p[1],
            model,
        };
        for (o, &t_k) in out.iter_mut().zip(x) {
            *o = crate::bath::ld_nonequilibrium(&table, t_k, t_fixed_ps, &params, p[2])?;
        }
        Ok(())
    };

    let w_param = if model == DecoherenceModel::Equilibrium {
        Parameter::fixed("w_nm", 22.0) // inert for the equilibrium law
    } else {
        Parameter::free("w_nm", 30.0, 2.0, 500.0)
    };
    let ld0_param = if free_scale {
        Parameter::free("ld0", 1.0, 0.01, 100.0)
    } else {
        Parameter::fixed("ld0", 1.0)
    };
    let params = vec![
        Parameter::free("sigma_a2", 0.02, 1e-4, 1.0),
        w_param,
        ld0_param,
    ];
    let problem = FitProblem::new(model_fn, x, y, params)?;
    let result = least_squares(&problem, cfg)?;

    Ok(TemperatureFit {
        model,
        sigma_a2: result.values[0],
        sigma_err_a2: result.uncertainties[0],
        w_nm: (model != DecoherenceModel::Equilibrium).then_some(result.values[1]),
        w_err_nm: (model != DecoherenceModel::Equilibrium).then_some(result.uncertainties[1]),
        ld0: result.values[2],
        residual_rms: result.residual_rms,
        converged: result.converged,
        curvature_ok: result.curvature_ok,
    })
}

/// Kick-ratio fit outcome: pre-kick populations and the energy calibration.
#[derive(Debug, Clone)]
pub struct KickRatioFit {
    pub p3: f64,
    pub p3_err: f64,
    pub p5: f64,
    pub p5_err: f64,
    /// Fitted energy → P calibration scale, P per μJ.
    pub kappa_per_uj: f64,
    pub kappa_err: f64,
    pub residual_rms: f64,
    pub converged: bool,
    pub curvature_ok: bool,
}

/// Fit the LD₃,₅/LD₁,₃ ratio-vs-energy curve for the initial populations
/// p₃, p₅ of the pre-kick ensemble, with the energy → P scale fitted
/// jointly (the beam geometry is not modeled).
pub fn fit_kick_ratio(
    data: &[(f64, f64)],
    op: &KickOperator,
    cfg: &FitConfig,
) -> Result<KickRatioFit> {
    if data.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "kick-ratio fit needs at least 4 energy points, got {}",
            data.len()
        )));
    }
    let x: Vec<f64> = data.iter().map(|d| d.0).collect();
    let y: Vec<f64> = data.iter().map(|d| d.1).collect();

    let model_fn = |p: &[f64], x: &[f64], out: &mut [f64]| -> Result<()> {
        let mixture = InitialMixture::new(1.0 - p[0] - p[1], p[0], p[1])?;
        let cal = KickCalibration {
            p_per_uj: p[2],
            consistency_rel_tol: 1.0,
        };
        let ratios = ld_amplitude_ratio(op, &cal, x, &mixture)?;
        out.copy_from_slice(&ratios);
        Ok(())
    };
    let params = vec![
        Parameter::free("p3", 0.01, 0.0, 0.5),
        Parameter::free("p5", 0.001, 0.0, 0.25),
        Parameter::free("kappa_per_uj", 0.74, 0.2, 1.5),
    ];
    let problem = FitProblem::new(model_fn, x, y, params)?;
    let result = least_squares(&problem, cfg)?;

    Ok(KickRatioFit {
        p3: result.values[0],
        p3_err: result.uncertainties[0],
        p5: result.values[1],
        p5_err: result.uncertainties[1],
        kappa_per_uj: result.values[2],
        kappa_err: result.uncertainties[2],
        residual_rms: result.residual_rms,
        converged: result.converged,
        curvature_ok: result.curvature_ok,
    })
}

/// Bimolecular-decay fit outcome.
#[derive(Debug, Clone)]
pub struct BimolecularFit {
    pub n0_cm3: f64,
    pub n0_err_cm3: f64,
    /// Intensity scale (1 when the data are absolute densities).
    pub scale: f64,
    pub residual_rms: f64,
    pub converged: bool,
    pub curvature_ok: bool,
}

/// Fit the fluorescence-vs-temperature curve at a fixed pump-probe delay to
/// the bimolecular decay with roton-limited K(T). The initial density N₀ is
/// the fitting parameter (internally log-scaled); an optional free overall
/// scale accommodates arbitrary intensity units.
pub fn fit_bimolecular(
    data: &[(f64, f64)],
    t_delay_s: f64,
    table: &BathTable,
    k_ref_cm3_s: f64,
    t_ref_k: f64,
    free_scale: bool,
    cfg: &FitConfig,
) -> Result<BimolecularFit> {
    if t_delay_s <= 0.0 {
        return Err(Error::InvalidInput("delay must be positive".into()));
    }
    for &(t_k, _) in data {
        table.interpolate(t_k)?;
    }
    let x: Vec<f64> = data.iter().map(|d| d.0).collect();
    let y: Vec<f64> = data.iter().map(|d| d.1).collect();

    let table = table.clone();
    let model_fn = move |p: &[f64], x: &[f64], out: &mut [f64]| -> Result<()> {
        let params = AnnihilationParams {
            n0_cm3: 10f64.powf(p[0]),
            k_ref_cm3_s,
            t_ref_k,
        };
        let scale = 10f64.powf(p[1]);
        for (o, &t_k) in out.iter_mut().zip(x) {
            *o = scale * bimolecular_density(&table, t_delay_s, t_k, &params)?;
        }
        Ok(())
    };
    let scale_param = if free_scale {
        Parameter::free("log10_scale", 0.0, -30.0, 30.0)
    } else {
        Parameter::fixed("log10_scale", 0.0)
    };
    let params = vec![
        Parameter::free("log10_n0", 13.0, 11.0, 16.0),
        scale_param,
    ];
    let problem = FitProblem::new(model_fn, x, y, params)?;
    let result = least_squares(&problem, cfg)?;

    let n0 = 10f64.powf(result.values[0]);
    let n0_err = result.uncertainties[0] * n0 * std::f64::consts::LN_10;
    Ok(BimolecularFit {
        n0_cm3: n0,
        n0_err_cm3: n0_err,
        scale: 10f64.powf(result.values[1]),
        residual_rms: result.residual_rms,
        converged: result.converged,
        curvature_ok: result.curvature_ok,
    })
}

/// Branch-weight fit outcome for the LD₁,₃ ro-vibrational multiplet.
#[derive(Debug, Clone)]
pub struct BranchSpectrumFit {
    /// Fitted branch amplitudes for v = 0, 1, 2 … (absolute scale absorbed).
    pub amplitudes: Vec<f64>,
    pub amplitude_errs: Vec<f64>,
    pub residual_rms: f64,
    pub converged: bool,
}

/// Fit vibrational branch amplitudes to a measured (or synthesized) LD₁,₃
/// spectral multiplet. The forward model re-synthesizes the trace with the
/// candidate amplitudes and pushes it through the same spectral pipeline,
/// then compares amplitudes at the data frequencies by linear interpolation.
pub fn fit_branch_spectrum(
    data: &[(f64, f64)],
    constants: &MoleculeConstants,
    beat_weights: &[f64],
    tau_ns: f64,
    grid: &TimeGrid,
    opts: &SpectrumOptions,
    cfg: &FitConfig,
) -> Result<BranchSpectrumFit> {
    if data.len() < 8 {
        return Err(Error::InvalidInput(
            "branch fit needs a spectral curve, not isolated points".into(),
        ));
    }
    let n_branches = constants.b_v_thz.len();
    let x: Vec<f64> = data.iter().map(|d| d.0).collect();
    let y: Vec<f64> = data.iter().map(|d| d.1).collect();

    let constants = constants.clone();
    let beat_weights = beat_weights.to_vec();
    let grid = *grid;
    let opts = opts.clone();
    let model_fn = move |p: &[f64], x: &[f64], out: &mut [f64]| -> Result<()> {
        let mut components: Vec<BeatComponent> = Vec::new();
        for (v, &amp) in p.iter().enumerate().take(constants.b_v_thz.len()) {
            let scaled: Vec<f64> = beat_weights.iter().map(|w| w * amp).collect();
            for line in beat_lines(&constants, v, 1, &scaled)? {
                components.push(BeatComponent {
                    frequency_thz: line.frequency_thz,
                    weight: line.weight,
                });
            }
        }
        let trace = synthesize_ld(&components, tau_ns, &grid)?;
        let spec = fourier_spectrum(&trace, &opts)?;
        for (o, &f) in out.iter_mut().zip(x) {
            *o = interp_linear(&spec.freq_thz, &spec.amplitude, f);
        }
        Ok(())
    };

    let params: Vec<Parameter> = (0..n_branches)
        .map(|v| Parameter::free(format!("a{v}"), 0.3, 0.0, 10.0))
        .collect();
    let problem = FitProblem::new(model_fn, x, y, params)?;
    let result = least_squares(&problem, cfg)?;

    Ok(BranchSpectrumFit {
        amplitudes: result.values.clone(),
        amplitude_errs: result.uncertainties.clone(),
        residual_rms: result.residual_rms,
        converged: result.converged,
    })
}

fn interp_linear(x: &[f64], y: &[f64], xq: f64) -> f64 {
    if xq <= x[0] {
        return y[0];
    }
    if xq >= x[x.len() - 1] {
        return y[y.len() - 1];
    }
    let i = x.partition_point(|&v| v <= xq).clamp(1, x.len() - 1);
    let t = (xq - x[i - 1]) / (x[i] - x[i - 1]);
    y[i - 1] * (1.0 - t) + y[i] * t
}
