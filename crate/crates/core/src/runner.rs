//! Subcommands behind the `cim` binary. Each writes schema-tagged CSV files
//! into the configured output directory and returns an [`Outcome`].

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audit::{write_audits_csv, Audit};
use crate::config::{pad, ExperimentConfig, Flow};
use crate::csv;
use crate::error::{CimError, Result};
use crate::gap::{self, GapCertificate};
use crate::hyperbolic::{self, HyperbolicConfig};
use crate::manifold::{
    self, build_compact_manifold, lipschitz_audit, FlowConfig, GraphSample,
};
use crate::parabolic::{self, ParabolicConfig};
use crate::robustness::{self, fit_power_law, lift};
use crate::spectral::{EpsWeight, ProductState, SpectralField};

pub const EXIT_OK: i32 = 0;
pub const EXIT_AUDIT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Process exit code for an error.
pub fn exit_code(e: &CimError) -> i32 {
    match e {
        CimError::Domain(_) | CimError::Config(_) | CimError::Range { .. } | CimError::Dimension { .. } => EXIT_USAGE,
        CimError::Pipeline { source, .. } => match source.as_ref() {
            CimError::Domain(_) | CimError::Config(_) => EXIT_USAGE,
            _ => EXIT_NUMERIC,
        },
        CimError::BlowUp { .. } | CimError::EmptyCloud | CimError::Io(_) => EXIT_NUMERIC,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// False when an audit failed.
    pub passed: bool,
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_OK
        } else {
            EXIT_AUDIT
        }
    }
}

struct Out {
    dir: PathBuf,
    files: Vec<PathBuf>,
    lines: Vec<String>,
}

impl Out {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            lines: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn say(&mut self, line: String) {
        log::info!("{line}");
        self.lines.push(line);
    }

    fn finish(self, passed: bool) -> Outcome {
        Outcome {
            passed,
            lines: self.lines,
            files: self.files,
        }
    }
}

/// `u0` from the config, or seeded random data with `n⁻¹` decay scaled to
/// L² norm `amplitude`.
pub fn initial_u0(cfg: &ExperimentConfig) -> Result<SpectralField> {
    if let Some(c) = &cfg.u0 {
        return pad(c, cfg.modes);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let raw: Vec<f64> = (1..=cfg.modes)
        .map(|n| rng.gen_range(-1.0..1.0) / n as f64)
        .collect();
    let u = SpectralField::new(raw)?;
    let norm = u.norm_hs(0.0);
    Ok(if norm > 0.0 { u.scale(cfg.amplitude / norm) } else { u })
}

fn initial_state(cfg: &ExperimentConfig) -> Result<ProductState> {
    let u = initial_u0(cfg)?;
    let v = match &cfg.ut0 {
        Some(c) => pad(c, cfg.modes)?,
        None => SpectralField::zeros(cfg.modes),
    };
    Ok(ProductState { u, v })
}

fn parabolic_cfg(cfg: &ExperimentConfig, cutoff: bool) -> Result<ParabolicConfig> {
    let mut p = ParabolicConfig::forced(cfg.forcing_field()?).with_dt(cfg.dt);
    p.use_modified_nonlinearity = cutoff;
    p.delta = cfg.delta;
    p.validate()?;
    Ok(p)
}

fn hyperbolic_cfg(cfg: &ExperimentConfig, eps: f64, cutoff: bool) -> Result<HyperbolicConfig> {
    let mut h = HyperbolicConfig::forced(eps, cfg.forcing_field()?).with_dt(cfg.dt);
    h.use_modified_nonlinearity = cutoff;
    h.delta = cfg.delta;
    h.validate()?;
    Ok(h)
}

fn write_certificate(out: &mut Out, cert: &GapCertificate) -> Result<()> {
    out.write("certificate.csv", |w| {
        let cols = ["delta", "ell", "n_star_parabolic", "eps", "n_star_hyperbolic", "eps_s", "eps_s_found"]
            .map(String::from);
        csv::write_header(w, "certificate v1", &cols)?;
        csv::write_fields(
            w,
            &[
                csv::fmt_f64(cert.delta),
                csv::fmt_f64(cert.ell),
                cert.n_star_parabolic.to_string(),
                csv::fmt_f64(cert.eps),
                cert.n_star_hyperbolic.map_or_else(|| "none".into(), |n| n.to_string()),
                csv::fmt_f64(cert.eps_s_estimate),
                u8::from(cert.eps_s_found).to_string(),
            ],
        )
    })?;
    out.write("margins.csv", |w| {
        let cols = ["name", "lhs", "rhs", "holds"].map(String::from);
        csv::write_header(w, "margins v1", &cols)?;
        for m in &cert.margins {
            csv::write_fields(
                w,
                &[
                    m.name.clone(),
                    csv::fmt_f64(m.lhs),
                    csv::fmt_f64(m.rhs),
                    u8::from(m.holds()).to_string(),
                ],
            )?;
        }
        Ok(())
    })
}

/// Gap certificate at `(delta, eps)`.
pub fn cmd_certify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Out::new(&cfg.out)?;
    let cert = gap::certify(cfg.delta, cfg.eps, cfg.n_max)?;
    out.say(format!("ell = {}, N*_parabolic = {}", cert.ell, cert.n_star_parabolic));
    match cert.n_star_hyperbolic {
        Some(n) => out.say(format!("eps = {}: N*_hyperbolic = {n}", cert.eps)),
        None => out.say(format!("eps = {}: no hyperbolic dimension up to {}", cert.eps, cfg.n_max)),
    }
    out.say(format!(
        "eps_s = {}{}",
        cert.eps_s_estimate,
        if cert.eps_s_found { "" } else { " (not found)" }
    ));
    write_certificate(&mut out, &cert)?;
    Ok(out.finish(true))
}

fn parabolic_audits(cfg: &ExperimentConfig, rec: &parabolic::TrajectoryRecord, u0: &SpectralField) -> Result<Vec<Audit>> {
    if rec.modified {
        return Ok(Vec::new());
    }
    let f = cfg.forcing_field()?;
    Ok(vec![
        parabolic::check_l2_decay(rec, u0, &f, cfg.slack)?,
        parabolic::check_lyapunov_monotone(rec, cfg.slack),
        parabolic::check_h1_absorbing(rec, u0, &f, cfg.slack)?,
    ])
}

fn hyperbolic_audits(cfg: &ExperimentConfig, traj: &hyperbolic::HyperbolicTrajectory, x0: &ProductState) -> Result<Vec<Audit>> {
    let mut audits = Vec::new();
    if !cfg.simulate_cutoff {
        audits.push(hyperbolic::check_energy_monotone(traj, cfg.slack * cfg.dt));
    }
    let w = EpsWeight::new(traj.eps)?;
    let mut lower = Audit::new("n3_lower", 0.0);
    let mut upper = Audit::new("n3_upper", 0.0);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let x3 = s.norm_xeps(3, w);
        let n3 = hyperbolic::norm_n3(s, traj.eps)?;
        lower.record_with_slack(*t, 0.5 * x3 * x3, n3, 1e-12 * n3.abs());
        upper.record_with_slack(*t, n3, 2.5 * x3 * x3, 1e-12 * x3 * x3);
    }
    audits.push(lower);
    audits.push(upper);
    let dec = hyperbolic::evolve_decomposed(x0, cfg.t_end, &hyperbolic_cfg(cfg, traj.eps, cfg.simulate_cutoff)?)?;
    let mut split = Audit::new("split_defect", 1e-9);
    split.record(cfg.t_end, dec.max_split_defect(), 0.0);
    audits.push(split);
    Ok(audits)
}

fn report_audits(out: &mut Out, audits: &[Audit]) -> Result<bool> {
    for a in audits {
        out.say(format!(
            "audit {}: {} ({} checks, worst {:e})",
            a.name,
            if a.passed() { "pass" } else { "FAIL" },
            a.checked,
            a.max_violation
        ));
    }
    out.write("audits.csv", |w| write_audits_csv(w, audits))?;
    Ok(audits.iter().all(Audit::passed))
}

/// One trajectory of the chosen flow with its a-priori audits.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Out::new(&cfg.out)?;
    let audits = match cfg.flow {
        Flow::Parabolic => {
            let p = parabolic_cfg(cfg, cfg.simulate_cutoff)?;
            let u0 = initial_u0(cfg)?;
            let rec = parabolic::evolve(&u0, cfg.t_end, &p)?;
            out.say(format!("parabolic: {} steps to t = {}", rec.len() - 1, cfg.t_end));
            out.write("trajectory.csv", |w| rec.write_csv(w))?;
            parabolic_audits(cfg, &rec, &u0)?
        }
        Flow::Hyperbolic => {
            let h = hyperbolic_cfg(cfg, cfg.eps, cfg.simulate_cutoff)?;
            let x0 = initial_state(cfg)?;
            let traj = hyperbolic::evolve_hyperbolic(&x0, cfg.t_end, &h)?;
            out.say(format!("hyperbolic eps = {}: {} steps to t = {}", cfg.eps, traj.len() - 1, cfg.t_end));
            out.write("trajectory.csv", |w| traj.write_csv(w))?;
            hyperbolic_audits(cfg, &traj, &x0)?
        }
    };
    let passed = report_audits(&mut out, &audits)?;
    Ok(out.finish(passed))
}

fn write_graph(w: &mut impl Write, g: &GraphSample) -> Result<()> {
    let n = g.values.first().map_or(0, |p| p.u.n_modes());
    let hyp = g.kind == manifold::FlowKind::Hyperbolic;
    let mut cols: Vec<String> = csv::indexed("xi", g.n_low).collect();
    if hyp {
        cols.extend(csv::indexed("xi_t", g.n_low));
    }
    cols.extend(csv::indexed("m_u", n));
    if hyp {
        cols.extend(csv::indexed("m_ut", n));
    }
    cols.push("converged".into());
    cols.push("residual".into());
    csv::write_header(w, "graph v1", &cols)?;
    for i in 0..g.len() {
        let (xi, m) = (&g.xi_grid[i], &g.values[i]);
        let mut row: Vec<f64> = xi.u.coeffs()[..g.n_low].to_vec();
        if hyp {
            row.extend_from_slice(&xi.v.coeffs()[..g.n_low]);
        }
        row.extend_from_slice(m.u.coeffs());
        if hyp {
            row.extend_from_slice(m.v.coeffs());
        }
        row.push(if g.converged[i] { 1.0 } else { 0.0 });
        row.push(g.residual[i]);
        csv::write_row(w, row)?;
    }
    Ok(())
}

/// Graph sample, ω-cloud and compact manifold cloud for one flow.
pub fn cmd_manifold(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Out::new(&cfg.out)?;
    let settings = cfg.pipeline()?;
    let par = robustness::run_parabolic_stage(&settings)?;
    out.say(format!("N* = {}, |W| = {}", par.n_star, par.w_grid.len()));
    let (graph, omega, tau3, fc) = match cfg.flow {
        Flow::Parabolic => (
            par.graph.clone(),
            par.omega.clone(),
            par.tau3,
            FlowConfig::Parabolic(settings.parabolic_config()),
        ),
        Flow::Hyperbolic => {
            guard_eps(&par.certificate, &[cfg.eps], cfg.n_star.is_some())?;
            let st = robustness::run_hyperbolic_stage(&par, cfg.eps, &settings)?;
            (st.graph, st.omega, st.tau3, FlowConfig::Hyperbolic(settings.hyperbolic_config(cfg.eps)))
        }
    };
    let windows = settings.windows.with_tau3(tau3, settings.i3_count);
    let m = build_compact_manifold(&omega, &windows, &fc)?;
    out.say(format!(
        "graph: {} points, {} unconverged; omega: {}; manifold: {}; tau3 = {}",
        graph.len(),
        graph.n_unconverged(),
        omega.len(),
        m.len(),
        tau3
    ));
    out.write("graph.csv", |w| write_graph(w, &graph))?;
    out.write("omega.csv", |w| omega.write_csv(w))?;
    out.write("manifold.csv", |w| m.write_csv(w))?;
    let defect = manifold::invariance_defect(&m, 0.1, &fc)?;
    out.say(format!("invariance defect over 0.1: {defect:e}"));
    let data = attraction_data(cfg)?;
    let times = crate::flow::linspace(0.0, cfg.t_horizon, 6);
    let att = manifold::attraction_audit(&m, &data, &times, &fc)?;
    out.say(format!("attraction rate {:.4} (distance {:e} -> {:e})", att.rate, att.distances[0], att.distances[5]));
    out.write("attraction.csv", |w| {
        csv::write_header(w, "attraction v1", &["t".into(), "dist".into()])?;
        for (t, d) in att.times.iter().zip(&att.distances) {
            csv::write_row(w, [*t, *d])?;
        }
        Ok(())
    })?;
    let lip = lipschitz_audit(&graph, fc.eps_weight(), par.certificate.ell)?;
    out.say(format!("graph Lipschitz ratio {:.4} (reference {})", lip.max_ratio, lip.bound));
    let mut audits = vec![robustness::check_tail_bound(&graph, par.n_star)?];
    let mut conv = Audit::new("graph_converged", 0.0);
    conv.record(0.0, graph.n_unconverged() as f64, 0.0);
    audits.push(conv);
    let passed = report_audits(&mut out, &audits)?;
    Ok(out.finish(passed))
}

/// Four seeded smooth states (`n⁻²` decay, H¹ norm `amplitude`) with zero
/// velocity, drawn away from the manifold.
fn attraction_data(cfg: &ExperimentConfig) -> Result<Vec<ProductState>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    (0..4)
        .map(|_| {
            let raw: Vec<f64> = (1..=cfg.modes)
                .map(|n| rng.gen_range(-1.0..1.0) / (n * n) as f64)
                .collect();
            let u = SpectralField::new(raw)?;
            let norm = u.norm_hs(1.0);
            let u = if norm > 0.0 { u.scale(cfg.amplitude / norm) } else { u };
            Ok(manifold::parabolic_point(u))
        })
        .collect()
}

fn guard_eps(cert: &GapCertificate, eps: &[f64], overridden: bool) -> Result<()> {
    if overridden {
        return Ok(());
    }
    match eps.iter().find(|e| **e > cert.eps_s_estimate) {
        Some(e) => Err(CimError::Domain(format!(
            "eps = {e} exceeds the certified threshold eps_s = {}; set n_star to override",
            cert.eps_s_estimate
        ))),
        None => Ok(()),
    }
}

/// `ε`-sweep of the manifold distance with a power-law fit, plus the
/// singular-limit comparison of single trajectories. With
/// `synthetic_distances` set only the fit is run.
pub fn cmd_robustness(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Out::new(&cfg.out)?;
    if let Some(d) = &cfg.synthetic_distances {
        if d.len() != cfg.eps_list.len() {
            return Err(CimError::Config(format!(
                "{} synthetic distances for {} eps values",
                d.len(),
                cfg.eps_list.len()
            )));
        }
        let fit = fit_power_law(&cfg.eps_list, d)?;
        out.say(format!("fit: phi = {}, Lambda = {}, r2 = {}", fit.phi, fit.lambda, fit.r_squared));
        out.write("fit.csv", |w| fit.write_csv(w))?;
        return Ok(out.finish(true));
    }
    let cert = gap::certify(cfg.delta, 1.0, cfg.n_max)?;
    guard_eps(&cert, &cfg.eps_list, cfg.n_star.is_some())?;
    let settings = cfg.pipeline()?;
    let par = robustness::run_parabolic_stage(&settings)?;
    let report = robustness::sweep_eps(&par, &cfg.eps_list, &settings)?;
    for r in &report.rows {
        out.say(format!("eps = {:e}: dist = {:e} ({} points)", r.eps, r.report.dist, r.cloud_size));
    }
    out.say(format!(
        "fit: phi = {}, Lambda = {}, r2 = {}",
        report.fit.phi, report.fit.lambda, report.fit.r_squared
    ));
    out.write("sweep.csv", |w| report.write_sweep_csv(w))?;
    out.write("fit.csv", |w| report.fit.write_csv(w))?;
    if cfg.singular_limit {
        let window = report.windows.comparison_window();
        let p = parabolic_cfg(cfg, cfg.simulate_cutoff)?;
        let x0 = lift(&initial_u0(cfg)?, &p.f)?;
        let mut sups = Vec::with_capacity(cfg.eps_list.len());
        for &eps in &cfg.eps_list {
            let h = hyperbolic_cfg(cfg, eps, cfg.simulate_cutoff)?;
            let r = robustness::run_singular_limit(&x0, window, cfg.singular_samples, &p, &h)?;
            sups.push(r.sup_t_norm);
        }
        let fit = fit_power_law(&cfg.eps_list, &sups)?;
        out.say(format!(
            "singular limit on [{}, {}]: phi = {}, r2 = {}",
            window.0, window.1, fit.phi, fit.r_squared
        ));
        out.write("singular_limit.csv", |w| {
            csv::write_header(w, "singular-limit v1", &["eps".into(), "sup_norm".into()])?;
            for (e, s) in cfg.eps_list.iter().zip(&sups) {
                csv::write_row(w, [*e, *s])?;
            }
            Ok(())
        })?;
        out.write("singular_fit.csv", |w| fit.write_csv(w))?;
    }
    Ok(out.finish(true))
}

/// Both flows' a-priori audits from the configured data.
pub fn cmd_audit(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Out::new(&cfg.out)?;
    let u0 = initial_u0(cfg)?;
    let rec = parabolic::evolve(&u0, cfg.t_end, &parabolic_cfg(cfg, false)?)?;
    let mut audits = parabolic_audits(cfg, &rec, &u0)?;
    let x0 = initial_state(cfg)?;
    let strict = ExperimentConfig {
        simulate_cutoff: false,
        ..cfg.clone()
    };
    let traj = hyperbolic::evolve_hyperbolic(&x0, cfg.t_end, &hyperbolic_cfg(cfg, cfg.eps, false)?)?;
    audits.extend(hyperbolic_audits(&strict, &traj, &x0)?);
    let passed = report_audits(&mut out, &audits)?;
    Ok(out.finish(passed))
}
