//! Command implementations behind the `he2rot` binary: every command is a
//! pure function of (config, input files, seed) writing CSV/report files
//! into the output directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bath::{BathTable, DecoherenceModel, DecoherenceParams};
use crate::config::Loaded;
use crate::error::{Error, Result};
use crate::fine::{allowed_pairs, beat_frequencies, beat_lines, fine_levels, splitting_span_ghz};
use crate::fit::adapters::{
    fit_bimolecular, fit_branch_spectrum, fit_kick_ratio, fit_spin_beating, fit_temperature,
};
use crate::fit::FitConfig;
use crate::io::{
    fmt_f64, read_trace_csv, read_xy_csv, write_csv, write_report, write_spectrum_csv,
    write_trace_csv, Provenance,
};
use crate::rotor::{
    kick_ensemble, ld_amplitude_ratio, InitialMixture, KickCalibration, KickOperator, RotorBasis,
};
use crate::signal::{
    add_white_noise, fourier_spectrum, labeled_peaks, sliding_window_amplitude, synthesize_ld,
    AmplitudeSeries, BeatComponent, SpectrumOptions, TimeGrid,
};

/// The reproducible figure-level experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipe {
    Fig1bSpectrum,
    Fig2aRatio,
    Fig2bBeat,
    Fig3Temperature,
    FigS2bBimolecular,
}

impl Recipe {
    pub fn name(&self) -> &'static str {
        match self {
            Recipe::Fig1bSpectrum => "fig1b-spectrum",
            Recipe::Fig2aRatio => "fig2a-ratio",
            Recipe::Fig2bBeat => "fig2b-beat",
            Recipe::Fig3Temperature => "fig3-temperature",
            Recipe::FigS2bBimolecular => "figS2b-bimolecular",
        }
    }

    pub const ALL: [Recipe; 5] = [
        Recipe::Fig1bSpectrum,
        Recipe::Fig2aRatio,
        Recipe::Fig2bBeat,
        Recipe::Fig3Temperature,
        Recipe::FigS2bBimolecular,
    ];
}

impl std::str::FromStr for Recipe {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Recipe::ALL
            .iter()
            .find(|r| r.name().eq_ignore_ascii_case(&lower))
            .copied()
            .ok_or_else(|| Error::UnknownRecipe(s.to_string()))
    }
}

/// Resolved output settings shared by all commands.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub prov: Provenance,
}

impl RunContext {
    pub fn new(loaded: &Loaded, out_override: Option<PathBuf>, seed_override: Option<u64>) -> Self {
        let seed = seed_override.unwrap_or(loaded.config.fit.seed);
        let out_dir = out_override.unwrap_or_else(|| loaded.dir.join(&loaded.config.output.dir));
        RunContext {
            out_dir,
            seed,
            prov: Provenance::new(loaded.hash.clone(), seed),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn kick_operator(loaded: &Loaded) -> Result<KickOperator> {
    let cfg = &loaded.config;
    let basis = Arc::new(RotorBasis::new(cfg.basis.n_max, cfg.parity()?)?);
    Ok(KickOperator::new(basis, cfg.molecule.b_v_thz[0]))
}

fn calibration(loaded: &Loaded) -> KickCalibration {
    KickCalibration {
        p_per_uj: loaded.config.kick.energy_to_p_per_uj,
        consistency_rel_tol: 0.25,
    }
}

fn mixture(loaded: &Loaded) -> Result<InitialMixture> {
    let k = &loaded.config.kick;
    InitialMixture::new(k.initial_p1, k.initial_p3, k.initial_p5)
}

fn fit_config(loaded: &Loaded, ctx: &RunContext) -> FitConfig {
    let f = &loaded.config.fit;
    FitConfig {
        max_iter: f.max_iter,
        rel_tol: f.rel_tol,
        step_tol: 1e-12,
        restarts: f.restarts,
        seed: ctx.seed,
    }
}

/// Line centers of the (1,3) and (3,5) coherences for peak labeling, THz.
fn line_centers(loaded: &Loaded) -> Result<(f64, f64)> {
    let constants = loaded.config.molecule_constants();
    let center = |n1: u32| -> Result<f64> {
        let pairs = allowed_pairs(n1, n1 + 2)?;
        let lo = fine_levels(n1, &constants)?;
        let hi = fine_levels(n1 + 2, &constants)?;
        let nus = beat_frequencies(&pairs, &lo, &hi, constants.b_v_thz[0])?;
        Ok(nus.iter().sum::<f64>() / nus.len() as f64)
    };
    Ok((center(1)?, center(3)?))
}

/// All beat components of the synthesized trace: the (1,3) multiplet per
/// vibrational branch, plus the optional (3,5) line on the v = 0 branch.
fn beat_components(loaded: &Loaded) -> Result<Vec<BeatComponent>> {
    let cfg = &loaded.config;
    let constants = cfg.molecule_constants();
    let branch_sum: f64 = cfg.signal.branch_weights_v.iter().sum();
    let mut components = Vec::new();
    for (v, &bw) in cfg.signal.branch_weights_v.iter().enumerate() {
        let w = bw / branch_sum;
        if w == 0.0 {
            continue;
        }
        let scaled: Vec<f64> = cfg.signal.beat_weights_13.iter().map(|c| c * w).collect();
        for line in beat_lines(&constants, v, 1, &scaled)? {
            components.push(BeatComponent {
                frequency_thz: line.frequency_thz,
                weight: line.weight,
            });
        }
    }
    if cfg.signal.ld35_relative > 0.0 {
        let c13_sum: f64 = cfg.signal.beat_weights_13.iter().sum();
        let pairs = allowed_pairs(3, 5)?;
        let w35 = cfg.signal.ld35_relative * c13_sum / pairs.len() as f64;
        let weights = vec![w35; pairs.len()];
        for line in beat_lines(&constants, 0, 3, &weights)? {
            components.push(BeatComponent {
                frequency_thz: line.frequency_thz,
                weight: line.weight,
            });
        }
    }
    Ok(components)
}

fn spectrum_options(loaded: &Loaded) -> Result<SpectrumOptions> {
    Ok(SpectrumOptions {
        taper: loaded.config.taper()?,
        zero_pad: loaded.config.signal.zero_pad,
        min_rel_peak: 0.05,
    })
}

/// `simulate-kick`: populations and coherences for each kick energy.
pub fn cmd_simulate_kick(
    loaded: &Loaded,
    ctx: &RunContext,
    energies_override: Option<Vec<f64>>,
) -> Result<Vec<PathBuf>> {
    let op = kick_operator(loaded)?;
    let cal = calibration(loaded);
    let mix = mixture(loaded)?;
    let energies = energies_override.unwrap_or_else(|| loaded.config.kick.energies_uj.clone());
    if energies.iter().any(|&e| e < 0.0) {
        return Err(Error::InvalidInput("kick energies must be non-negative".into()));
    }

    let mut rows = Vec::with_capacity(energies.len());
    for &e in &energies {
        let p = cal.p_per_uj * e;
        let ens = kick_ensemble(&op, &mix, p)?;
        let pop = |n: u32| ens.populations.get(&n).copied().unwrap_or(0.0);
        rows.push(format!(
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(e),
            fmt_f64(p),
            fmt_f64(pop(1)),
            fmt_f64(pop(3)),
            fmt_f64(pop(5)),
            fmt_f64(ens.coh13.re),
            fmt_f64(ens.coh13.im),
            fmt_f64(ens.coh35.re),
            fmt_f64(ens.coh35.im),
        ));
    }
    let path = ctx.path("kick_populations.csv");
    write_csv(
        &path,
        &ctx.prov,
        "energy_uJ,P,pop_N1,pop_N3,pop_N5,coh13_re,coh13_im,coh35_re,coh35_im",
        &rows,
    )?;
    Ok(vec![path])
}

fn synthesized_trace(loaded: &Loaded, ctx: &RunContext) -> Result<crate::signal::LdTrace> {
    let cfg = &loaded.config;
    let components = beat_components(loaded)?;
    let grid = TimeGrid::from_span(0.0, cfg.signal.trace_span_ps, cfg.signal.trace_dt_ps)?;
    let mut trace = synthesize_ld(&components, cfg.signal.tau13_ns, &grid)?;
    if cfg.signal.noise_relative > 0.0 {
        let amp0: f64 = components.iter().map(|c| c.weight).sum();
        let mut rng = ctx.rng();
        add_white_noise(
            trace.values_mut(),
            cfg.signal.noise_relative * amp0,
            &mut rng,
        );
    }
    Ok(trace)
}

/// `synthesize`: LD trace plus its spectrum.
pub fn cmd_synthesize(loaded: &Loaded, ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let trace = synthesized_trace(loaded, ctx)?;
    let trace_path = ctx.path("ld_trace.csv");
    write_trace_csv(&trace_path, &ctx.prov, &trace)?;
    let spectrum_path = write_spectrum_of(loaded, ctx, &trace)?;
    Ok(vec![trace_path, spectrum_path])
}

/// `spectrum`: Fourier analysis of an ingested trace CSV.
pub fn cmd_spectrum(loaded: &Loaded, ctx: &RunContext, data: &Path) -> Result<Vec<PathBuf>> {
    let trace = read_trace_csv(data)?;
    let path = write_spectrum_of(loaded, ctx, &trace)?;
    Ok(vec![path])
}

fn write_spectrum_of(
    loaded: &Loaded,
    ctx: &RunContext,
    trace: &crate::signal::LdTrace,
) -> Result<PathBuf> {
    let opts = spectrum_options(loaded)?;
    let (c13, c35) = line_centers(loaded)?;
    let mut expected = vec![("LD13".to_string(), c13)];
    if loaded.config.signal.ld35_relative > 0.0 {
        expected.push(("LD35".to_string(), c35));
    }
    let peaks = labeled_peaks(trace, &opts, &expected, 0.05)?;
    let spectrum = fourier_spectrum(trace, &opts)?;
    let path = ctx.path("ld_spectrum.csv");
    write_spectrum_csv(&path, &ctx.prov, &spectrum.freq_thz, &spectrum.amplitude, &peaks)?;
    Ok(path)
}

/// Outcome of a fit recipe; `converged` drives the process exit status.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub recipe: Recipe,
    pub converged: bool,
    pub files: Vec<PathBuf>,
    /// The report entries, for programmatic inspection.
    pub entries: Vec<(String, String)>,
}

/// `fit <recipe>`: run one figure-level fit, on ingested data when a path
/// is given and on self-generated synthetic data otherwise.
pub fn cmd_fit(
    loaded: &Loaded,
    ctx: &RunContext,
    recipe: Recipe,
    data_path: Option<&Path>,
) -> Result<FitOutcome> {
    match recipe {
        Recipe::Fig2bBeat => fit_fig2b(loaded, ctx, data_path),
        Recipe::Fig2aRatio => fit_fig2a(loaded, ctx, data_path),
        Recipe::Fig3Temperature => fit_fig3(loaded, ctx, data_path),
        Recipe::FigS2bBimolecular => fit_figs2b(loaded, ctx, data_path),
        Recipe::Fig1bSpectrum => fit_fig1b(loaded, ctx, data_path),
    }
}

fn report_common(recipe: Recipe, converged: bool, rms: f64) -> Vec<(String, String)> {
    vec![
        ("recipe".into(), recipe.name().into()),
        ("converged".into(), converged.to_string()),
        ("residual_rms".into(), fmt_f64(rms)),
    ]
}

fn finish_fit(
    ctx: &RunContext,
    recipe: Recipe,
    entries: Vec<(String, String)>,
    mut files: Vec<PathBuf>,
    converged: bool,
) -> Result<FitOutcome> {
    let report = ctx.path(&format!("{}_report.txt", recipe.name()));
    write_report(&report, &ctx.prov, &entries)?;
    files.insert(0, report);
    Ok(FitOutcome {
        recipe,
        converged,
        files,
        entries,
    })
}

fn fit_fig2b(loaded: &Loaded, ctx: &RunContext, data_path: Option<&Path>) -> Result<FitOutcome> {
    let cfg = &loaded.config;
    let constants = cfg.molecule_constants();
    let recipe = Recipe::Fig2bBeat;

    let series = match data_path {
        Some(p) => {
            let points = read_xy_csv(p, "t_ps", "amplitude")?;
            AmplitudeSeries {
                t_ps: points.iter().map(|d| d.0).collect(),
                amplitude: points.iter().map(|d| d.1).collect(),
            }
        }
        None => {
            // synthetic: the full pipeline, trace -> sliding window
            let lines = beat_lines(&constants, 0, 1, &cfg.signal.beat_weights_13)?;
            let components: Vec<BeatComponent> = lines
                .iter()
                .map(|l| BeatComponent {
                    frequency_thz: l.frequency_thz,
                    weight: l.weight,
                })
                .collect();
            let grid = TimeGrid::from_span(0.0, 1650.0, cfg.signal.trace_dt_ps)?;
            let mut trace = synthesize_ld(&components, cfg.signal.tau13_ns, &grid)?;
            let amp0: f64 = cfg.signal.beat_weights_13.iter().sum();
            let mut rng = ctx.rng();
            add_white_noise(
                trace.values_mut(),
                cfg.fit.synthetic_noise_fig2b * amp0,
                &mut rng,
            );
            let (c13, _) = line_centers(loaded)?;
            sliding_window_amplitude(&trace, c13, 20.0, 15.0)?
        }
    };

    let lines = beat_lines(&constants, 0, 1, &cfg.signal.beat_weights_13)?;
    let freqs: Vec<f64> = lines.iter().map(|l| l.frequency_thz).collect();
    let fit = fit_spin_beating(&series, &freqs, &fit_config(loaded, ctx))?;

    let mut entries = report_common(recipe, fit.converged, fit.residual_rms);
    entries.push(("iterations".into(), fit.iterations.to_string()));
    entries.push(("tau_ns".into(), fmt_f64(fit.tau_ns)));
    entries.push(("tau_err_ns".into(), fmt_f64(fit.tau_err_ns)));
    entries.push(("linewidth_ghz".into(), fmt_f64(fit.linewidth_ghz)));
    for (k, (w, e)) in fit.weights.iter().zip(&fit.weight_errs).enumerate() {
        entries.push((format!("c{}", k + 1), fmt_f64(*w)));
        entries.push((format!("c{}_err", k + 1), fmt_f64(*e)));
    }
    entries.push(("curvature_ok".into(), fit.curvature_ok.to_string()));

    let data_file = ctx.path(&format!("{}_data.csv", recipe.name()));
    let rows: Vec<String> = series
        .t_ps
        .iter()
        .zip(&series.amplitude)
        .map(|(t, a)| format!("{},{}", fmt_f64(*t), fmt_f64(*a)))
        .collect();
    write_csv(&data_file, &ctx.prov, "t_ps,amplitude", &rows)?;

    let curve_file = ctx.path(&format!("{}_curve.csv", recipe.name()));
    let comps_fit: Vec<BeatComponent> = freqs
        .iter()
        .zip(&fit.weights)
        .map(|(&f, &w)| BeatComponent {
            frequency_thz: f,
            weight: w,
        })
        .collect();
    let rows: Vec<String> = (0..=1650)
        .map(|i| {
            let t = i as f64;
            format!(
                "{},{}",
                fmt_f64(t),
                fmt_f64(crate::signal::analytic_envelope(&comps_fit, fit.tau_ns, t))
            )
        })
        .collect();
    write_csv(&curve_file, &ctx.prov, "t_ps,amplitude_fit", &rows)?;

    finish_fit(ctx, recipe, entries, vec![data_file, curve_file], fit.converged)
}

fn fit_fig2a(loaded: &Loaded, ctx: &RunContext, data_path: Option<&Path>) -> Result<FitOutcome> {
    let cfg = &loaded.config;
    let recipe = Recipe::Fig2aRatio;
    let op = kick_operator(loaded)?;

    let data: Vec<(f64, f64)> = match data_path {
        Some(p) => read_xy_csv(p, "energy_uJ", "ratio")?,
        None => {
            let cal = calibration(loaded);
            let mix = mixture(loaded)?;
            let ratios = ld_amplitude_ratio(&op, &cal, &cfg.kick.energies_uj, &mix)?;
            let mut rng = ctx.rng();
            cfg.kick
                .energies_uj
                .iter()
                .zip(ratios)
                .map(|(&e, r)| {
                    let mut v = [r];
                    add_white_noise(&mut v, cfg.fit.synthetic_noise_fig2a * r, &mut rng);
                    (e, v[0].max(0.0))
                })
                .collect()
        }
    };

    let fit = fit_kick_ratio(&data, &op, &fit_config(loaded, ctx))?;
    let mut entries = report_common(recipe, fit.converged, fit.residual_rms);
    entries.push(("p3".into(), fmt_f64(fit.p3)));
    entries.push(("p3_err".into(), fmt_f64(fit.p3_err)));
    entries.push(("p5".into(), fmt_f64(fit.p5)));
    entries.push(("p5_err".into(), fmt_f64(fit.p5_err)));
    entries.push(("kappa_per_uj".into(), fmt_f64(fit.kappa_per_uj)));
    entries.push(("kappa_err".into(), fmt_f64(fit.kappa_err)));
    entries.push(("curvature_ok".into(), fit.curvature_ok.to_string()));

    let data_file = ctx.path(&format!("{}_data.csv", recipe.name()));
    let rows: Vec<String> = data
        .iter()
        .map(|(e, r)| format!("{},{}", fmt_f64(*e), fmt_f64(*r)))
        .collect();
    write_csv(&data_file, &ctx.prov, "energy_uJ,ratio", &rows)?;

    // model curve on a dense energy grid at the fitted parameters
    let curve_file = ctx.path(&format!("{}_curve.csv", recipe.name()));
    let e_max = data.iter().map(|d| d.0).fold(0.0f64, f64::max);
    let energies: Vec<f64> = (1..=60).map(|i| e_max * i as f64 / 60.0).collect();
    let mix_fit = InitialMixture::new(1.0 - fit.p3 - fit.p5, fit.p3, fit.p5)?;
    let cal_fit = KickCalibration {
        p_per_uj: fit.kappa_per_uj,
        consistency_rel_tol: 1.0,
    };
    let ratios_fit = ld_amplitude_ratio(&op, &cal_fit, &energies, &mix_fit)?;
    let rows: Vec<String> = energies
        .iter()
        .zip(&ratios_fit)
        .map(|(e, r)| format!("{},{}", fmt_f64(*e), fmt_f64(*r)))
        .collect();
    write_csv(&curve_file, &ctx.prov, "energy_uJ,ratio_fit", &rows)?;

    finish_fit(ctx, recipe, entries, vec![data_file, curve_file], fit.converged)
}

fn fit_fig3(loaded: &Loaded, ctx: &RunContext, data_path: Option<&Path>) -> Result<FitOutcome> {
    let cfg = &loaded.config;
    let recipe = Recipe::Fig3Temperature;
    let table = loaded.load_bath_table()?;
    let delay_ps = cfg.decoherence.probe_delay_ps;

    let data: Vec<(f64, f64)> = match data_path {
        Some(p) => read_xy_csv(p, "T_K", "ld")?,
        None => {
            let params = DecoherenceParams {
                sigma_a2: cfg.decoherence.sigma13_a2,
                w_nm: cfg.decoherence.second_sound_width_nm,
                model: cfg.decoherence_model()?,
            };
            let mut rng = ctx.rng();
            let mut data = Vec::new();
            for k in 0..=31 {
                let t_k = 1.35 + 0.025 * k as f64;
                let ld = crate::bath::ld_nonequilibrium(&table, t_k, delay_ps, &params, 1.0)?;
                let mut v = [ld];
                add_white_noise(&mut v, cfg.fit.synthetic_noise_fig3 * ld, &mut rng);
                data.push((t_k, v[0]));
            }
            data
        }
    };

    // all three model variants, reported side by side
    let fc = fit_config(loaded, ctx);
    let eq = fit_temperature(&data, delay_ps, DecoherenceModel::Equilibrium, &table, false, &fc)?;
    let lit = fit_temperature(
        &data,
        delay_ps,
        DecoherenceModel::NonEquilibriumLiteral,
        &table,
        false,
        &fc,
    )?;
    let int = fit_temperature(
        &data,
        delay_ps,
        DecoherenceModel::NonEquilibriumIntegrated,
        &table,
        false,
        &fc,
    )?;
    let converged = eq.converged && lit.converged && int.converged;

    let mut entries = report_common(recipe, converged, lit.residual_rms);
    entries.push(("delay_ps".into(), fmt_f64(delay_ps)));
    for (tag, f) in [("equilibrium", &eq), ("noneq_literal", &lit), ("noneq_integrated", &int)] {
        entries.push((format!("{tag}_sigma_a2"), fmt_f64(f.sigma_a2)));
        entries.push((format!("{tag}_sigma_err_a2"), fmt_f64(f.sigma_err_a2)));
        if let (Some(w), Some(we)) = (f.w_nm, f.w_err_nm) {
            entries.push((format!("{tag}_w_nm"), fmt_f64(w)));
            entries.push((format!("{tag}_w_err_nm"), fmt_f64(we)));
        }
        entries.push((format!("{tag}_residual_rms"), fmt_f64(f.residual_rms)));
        entries.push((format!("{tag}_converged"), f.converged.to_string()));
    }
    // rate anchor at 1.95 K: instantaneous full-density rate of the literal fit
    let gamma_195 = crate::bath::gamma_full_density(&table, 1.95, lit.sigma_a2)?;
    entries.push(("noneq_literal_gamma_full_1p95K_ghz".into(), fmt_f64(gamma_195)));

    let data_file = ctx.path(&format!("{}_data.csv", recipe.name()));
    let rows: Vec<String> = data
        .iter()
        .map(|(t, v)| format!("{},{}", fmt_f64(*t), fmt_f64(*v)))
        .collect();
    write_csv(&data_file, &ctx.prov, "T_K,ld", &rows)?;

    // model curves and decoherence rates on a dense temperature grid
    let curve_file = ctx.path(&format!("{}_curve.csv", recipe.name()));
    let (lo, hi) = table.t_range();
    let mut rows = Vec::new();
    let steps = 174;
    for k in 0..=steps {
        let t_k = (lo * 1000.0 + (hi - lo) * 1000.0 * k as f64 / steps as f64).round() / 1000.0;
        let t_k = t_k.clamp(lo, hi);
        let ld_eq = crate::bath::ld_equilibrium(&table, t_k, delay_ps, eq.sigma_a2, eq.ld0)?;
        let p_lit = DecoherenceParams {
            sigma_a2: lit.sigma_a2,
            w_nm: lit.w_nm.unwrap_or(22.0),
            model: DecoherenceModel::NonEquilibriumLiteral,
        };
        let ld_lit = crate::bath::ld_nonequilibrium(&table, t_k, delay_ps, &p_lit, lit.ld0)?;
        let p_int = DecoherenceParams {
            sigma_a2: int.sigma_a2,
            w_nm: int.w_nm.unwrap_or(22.0),
            model: DecoherenceModel::NonEquilibriumIntegrated,
        };
        let ld_int = crate::bath::ld_nonequilibrium(&table, t_k, delay_ps, &p_int, int.ld0)?;
        let g_eq = crate::bath::gamma_equilibrium(&table, t_k, eq.sigma_a2)?;
        // effective rate of the non-equilibrium law at the probe delay
        let g_neq = -ld_lit.max(1e-300).ln() / (delay_ps * 1e-3) / lit.ld0.max(1e-300);
        rows.push(format!(
            "{},{},{},{},{},{}",
            fmt_f64(t_k),
            fmt_f64(ld_eq),
            fmt_f64(ld_lit),
            fmt_f64(ld_int),
            fmt_f64(g_eq),
            fmt_f64(g_neq),
        ));
    }
    write_csv(
        &curve_file,
        &ctx.prov,
        "T_K,ld_equilibrium_fit,ld_noneq_literal_fit,ld_noneq_integrated_fit,gamma_eq_GHz,gamma_noneq_eff_GHz",
        &rows,
    )?;

    finish_fit(ctx, recipe, entries, vec![data_file, curve_file], converged)
}

fn fit_figs2b(loaded: &Loaded, ctx: &RunContext, data_path: Option<&Path>) -> Result<FitOutcome> {
    let cfg = &loaded.config;
    let recipe = Recipe::FigS2bBimolecular;
    let table = loaded.load_bath_table()?;
    let delay_s = cfg.annihilation.pump_delay_ms * 1e-3;

    let data: Vec<(f64, f64)> = match data_path {
        Some(p) => read_xy_csv(p, "T_K", "intensity")?,
        None => {
            let params = crate::bath::AnnihilationParams {
                n0_cm3: cfg.annihilation.n0_cm3,
                k_ref_cm3_s: cfg.annihilation.k_ref_cm3_s,
                t_ref_k: cfg.annihilation.t_ref_k,
            };
            let mut rng = ctx.rng();
            let mut data = Vec::new();
            for k in 0..=15 {
                let t_k = 1.35 + 0.05 * k as f64;
                let n = crate::bath::bimolecular_density(&table, delay_s, t_k, &params)?;
                let mut v = [n];
                add_white_noise(&mut v, cfg.fit.synthetic_noise_figs2b * n, &mut rng);
                data.push((t_k, v[0]));
            }
            data
        }
    };

    let free_scale = data_path.is_some(); // ingested intensities carry arbitrary units
    let fit = fit_bimolecular(
        &data,
        delay_s,
        &table,
        cfg.annihilation.k_ref_cm3_s,
        cfg.annihilation.t_ref_k,
        free_scale,
        &fit_config(loaded, ctx),
    )?;

    let mut entries = report_common(recipe, fit.converged, fit.residual_rms);
    entries.push(("n0_cm3".into(), fmt_f64(fit.n0_cm3)));
    entries.push(("n0_err_cm3".into(), fmt_f64(fit.n0_err_cm3)));
    entries.push(("scale".into(), fmt_f64(fit.scale)));
    entries.push(("delay_ms".into(), fmt_f64(cfg.annihilation.pump_delay_ms)));
    entries.push(("curvature_ok".into(), fit.curvature_ok.to_string()));

    let data_file = ctx.path(&format!("{}_data.csv", recipe.name()));
    let rows: Vec<String> = data
        .iter()
        .map(|(t, v)| format!("{},{}", fmt_f64(*t), fmt_f64(*v)))
        .collect();
    write_csv(&data_file, &ctx.prov, "T_K,intensity", &rows)?;

    let curve_file = ctx.path(&format!("{}_curve.csv", recipe.name()));
    let params_fit = crate::bath::AnnihilationParams {
        n0_cm3: fit.n0_cm3,
        k_ref_cm3_s: cfg.annihilation.k_ref_cm3_s,
        t_ref_k: cfg.annihilation.t_ref_k,
    };
    let (lo, hi) = table.t_range();
    let mut rows = Vec::new();
    for k in 0..=100 {
        let t_k = (lo + (hi - lo) * k as f64 / 100.0).clamp(lo, hi);
        let n = crate::bath::bimolecular_density(&table, delay_s, t_k, &params_fit)?;
        rows.push(format!("{},{}", fmt_f64(t_k), fmt_f64(fit.scale * n)));
    }
    write_csv(&curve_file, &ctx.prov, "T_K,intensity_fit", &rows)?;

    finish_fit(ctx, recipe, entries, vec![data_file, curve_file], fit.converged)
}

fn fit_fig1b(loaded: &Loaded, ctx: &RunContext, data_path: Option<&Path>) -> Result<FitOutcome> {
    let cfg = &loaded.config;
    let recipe = Recipe::Fig1bSpectrum;
    let constants = cfg.molecule_constants();
    let opts = spectrum_options(loaded)?;
    let grid = TimeGrid::from_span(0.0, cfg.signal.trace_span_ps, cfg.signal.trace_dt_ps)?;
    let (c13, _) = line_centers(loaded)?;
    let band = (c13 - 0.08, c13 + 0.03);

    let data: Vec<(f64, f64)> = match data_path {
        Some(p) => read_xy_csv(p, "freq_thz", "amplitude")?,
        None => {
            // synthesize the multiplet with the configured branch weights and
            // analyze it exactly as a measured trace would be
            let branch_sum: f64 = cfg.signal.branch_weights_v.iter().sum();
            let mut components = Vec::new();
            for (v, &bw) in cfg.signal.branch_weights_v.iter().enumerate() {
                let scaled: Vec<f64> = cfg
                    .signal
                    .beat_weights_13
                    .iter()
                    .map(|c| c * bw / branch_sum)
                    .collect();
                for line in beat_lines(&constants, v, 1, &scaled)? {
                    components.push(BeatComponent {
                        frequency_thz: line.frequency_thz,
                        weight: line.weight,
                    });
                }
            }
            let trace = synthesize_ld(&components, cfg.signal.tau13_ns, &grid)?;
            let spec = fourier_spectrum(&trace, &opts)?;
            spec.freq_thz
                .iter()
                .zip(&spec.amplitude)
                .filter(|(&f, _)| f >= band.0 && f <= band.1)
                .map(|(&f, &a)| (f, a))
                .collect()
        }
    };

    let fit = fit_branch_spectrum(
        &data,
        &constants,
        &cfg.signal.beat_weights_13,
        cfg.signal.tau13_ns,
        &grid,
        &opts,
        &fit_config(loaded, ctx),
    )?;

    let mut entries = report_common(recipe, fit.converged, fit.residual_rms);
    for (v, (a, e)) in fit.amplitudes.iter().zip(&fit.amplitude_errs).enumerate() {
        entries.push((format!("branch_v{v}_amplitude"), fmt_f64(*a)));
        entries.push((format!("branch_v{v}_amplitude_err"), fmt_f64(*e)));
    }

    let data_file = ctx.path(&format!("{}_data.csv", recipe.name()));
    let rows: Vec<String> = data
        .iter()
        .map(|(f, a)| format!("{},{}", fmt_f64(*f), fmt_f64(*a)))
        .collect();
    write_csv(&data_file, &ctx.prov, "freq_thz,amplitude", &rows)?;

    // fitted multiplet on the data grid
    let curve_file = ctx.path(&format!("{}_curve.csv", recipe.name()));
    let mut components = Vec::new();
    for (v, &a) in fit.amplitudes.iter().enumerate() {
        let scaled: Vec<f64> = cfg.signal.beat_weights_13.iter().map(|c| c * a).collect();
        for line in beat_lines(&constants, v, 1, &scaled)? {
            components.push(BeatComponent {
                frequency_thz: line.frequency_thz,
                weight: line.weight,
            });
        }
    }
    let trace_fit = synthesize_ld(&components, cfg.signal.tau13_ns, &grid)?;
    let spec_fit = fourier_spectrum(&trace_fit, &opts)?;
    let rows: Vec<String> = data
        .iter()
        .map(|(f, _)| {
            let a = interp(&spec_fit.freq_thz, &spec_fit.amplitude, *f);
            format!("{},{}", fmt_f64(*f), fmt_f64(a))
        })
        .collect();
    write_csv(&curve_file, &ctx.prov, "freq_thz,amplitude_fit", &rows)?;

    finish_fit(ctx, recipe, entries, vec![data_file, curve_file], fit.converged)
}

fn interp(x: &[f64], y: &[f64], xq: f64) -> f64 {
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

/// One validation check: name, pass/fail, human-readable detail.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// `validate`: config, bath-table and basis sanity checks.
pub fn cmd_validate(loaded: &Loaded) -> Result<ValidationReport> {
    let cfg = &loaded.config;
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    };

    // bath table: structural load plus physics invariants
    match loaded.load_bath_table() {
        Ok(table) => {
            let issues = table.check_invariants();
            let (lo, hi) = table.t_range();
            push(
                "bath-table",
                issues.is_empty(),
                if issues.is_empty() {
                    format!("{} rows covering [{lo}, {hi}] K", table.rows().len())
                } else {
                    issues.join("; ")
                },
            );
        }
        Err(e) => push("bath-table", false, e.to_string()),
    }

    // fine-structure scale: splittings should sit at the few-GHz scale
    let constants = cfg.molecule_constants();
    match (splitting_span_ghz(1, &constants), splitting_span_ghz(3, &constants)) {
        (Ok(s1), Ok(s3)) => {
            let ok = s1 <= 10.0 && s3 <= 10.0;
            push(
                "fine-structure-scale",
                ok,
                if ok {
                    format!("spans N=1: {s1:.2} GHz, N=3: {s3:.2} GHz")
                } else {
                    format!(
                        "splittings {s1:.2}/{s3:.2} GHz exceed 10 GHz; expected the ~2 GHz scale"
                    )
                },
            );
        }
        (Err(e), _) | (_, Err(e)) => push("fine-structure-scale", false, e.to_string()),
    }

    // basis adequacy: the largest configured kick must clear the leak guard
    match (kick_operator(loaded), mixture(loaded)) {
        (Ok(op), Ok(mix)) => {
            let e_max = cfg.kick.energies_uj.iter().fold(0.0f64, |a, &b| a.max(b));
            let p = cfg.kick.energy_to_p_per_uj * e_max;
            match kick_ensemble(&op, &mix, p) {
                Ok(_) => push(
                    "basis-adequacy",
                    true,
                    format!("n_max = {} holds P = {p:.2} within the leak guard", cfg.basis.n_max),
                ),
                Err(e) => push("basis-adequacy", false, e.to_string()),
            }
        }
        (Err(e), _) | (_, Err(e)) => push("basis-adequacy", false, e.to_string()),
    }

    // trace grid covers the configured lines
    match beat_components(loaded) {
        Ok(comps) => {
            let f_max = comps.iter().map(|c| c.frequency_thz).fold(0.0f64, f64::max);
            let nyquist = 0.5 / cfg.signal.trace_dt_ps;
            push(
                "signal-grid",
                f_max < nyquist,
                format!("max line {f_max:.3} THz vs Nyquist {nyquist:.3} THz"),
            );
        }
        Err(e) => push("signal-grid", false, e.to_string()),
    }

    // pulse self-consistency at the reference energy
    {
        let pulse = crate::rotor::KickPulse {
            energy_uj: cfg.kick.reference_energy_uj,
            peak_intensity_w_cm2: cfg.kick.peak_intensity_w_cm2,
            duration_fwhm_fs: cfg.kick.duration_fwhm_fs,
            envelope: crate::rotor::Envelope::Gaussian,
            polarization_angle_rad: 0.0,
        };
        match crate::rotor::kick_strength(&pulse, &constants, &calibration(loaded)) {
            Ok(p) => push(
                "kick-calibration",
                true,
                format!("P({} uJ) = {p:.3}", cfg.kick.reference_energy_uj),
            ),
            Err(e) => push("kick-calibration", false, e.to_string()),
        }
    }

    Ok(ValidationReport { checks })
}
