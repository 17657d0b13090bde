//! One runner per scenario. Each writes its CSV artifacts into the output
//! directory and returns a JSON summary.

use std::f64::consts::TAU;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wavelab::diagnostics::{
    contraction_harness, evolve_monitored, growth_bound_audit, monitor_ab, ContractionOptions, GrowthAudit,
};
use wavelab::dn::{dn_apply, dn_flat_exact, dn_paralinearized};
use wavelab::lp::low_pass;
use wavelab::paradiff::{composition_defect, composition_test_symbol, OrderFit};
use wavelab::spectral::{sobolev_norm, write_field};
use wavelab::symmetrizer::{
    calculus_checks, energy_growth_constant, energy_phi, paralinearized_residuals, symmetrized_residual,
    write_residual_series, ResidualRow, SymmetrizerConfig,
};
use wavelab::waterwaves::{linear_frequency, zero_crossing_frequency, EvolveOptions, SurfaceState, TrajectoryRecord};
use wavelab::{Error, Field};

use crate::config::{Scenario, ScenarioConfig};
use crate::output::{AbortInfo, OutputDir};

pub struct Outcome {
    pub summary: Value,
    pub abort: Option<AbortInfo>,
}

impl Outcome {
    fn done(summary: Value) -> Outcome {
        Outcome { summary, abort: None }
    }
}

pub fn run(cfg: &ScenarioConfig, out: &mut OutputDir) -> Result<Outcome> {
    let mut outcome = match cfg.scenario {
        Scenario::FlatDnValidation => flat_dn_validation(cfg, out)?,
        Scenario::Dispersion => dispersion(cfg, out)?,
        Scenario::Conservation => conservation(cfg, out)?,
        Scenario::ParalinResidual => paralin_residual(cfg, out)?,
        Scenario::SymbolCalculus => symbol_calculus(cfg, out)?,
        Scenario::SymmetrizerRun => symmetrizer_run(cfg, out)?,
        Scenario::BlowupWatch => blowup_watch(cfg, out)?,
        Scenario::Contraction => contraction(cfg, out)?,
    };
    if let Value::Object(map) = &mut outcome.summary {
        map.insert("scenario".into(), json!(cfg.scenario.name()));
        map.insert("aborted".into(), json!(outcome.abort.is_some()));
    }
    out.write_json("summary.json", &outcome.summary)?;
    Ok(outcome)
}

fn e(v: f64) -> String {
    format!("{v:.12e}")
}

fn evolve_options(cfg: &ScenarioConfig, track_hamiltonian: bool) -> EvolveOptions {
    let mut o = EvolveOptions::new(cfg.numerics.dt, cfg.numerics.t_end);
    o.stride = cfg.numerics.stride;
    o.track_hamiltonian = track_hamiltonian;
    o
}

fn abort_info(rec: &TrajectoryRecord) -> Option<AbortInfo> {
    rec.abort.as_ref().map(|a| AbortInfo { t: a.t, last_good_t: a.last_good_t, reason: a.reason.clone() })
}

/// Per-sample Sobolev norms for `trajectory.csv` plus periodic full-state snapshots.
struct Recorder {
    s: f64,
    every: usize,
    seen: usize,
    norms: Vec<(f64, f64)>,
    snaps: Vec<SurfaceState>,
}

impl Recorder {
    fn new(cfg: &ScenarioConfig) -> Recorder {
        Recorder {
            s: cfg.monitor_config().s,
            every: cfg.numerics.snapshots,
            seen: 0,
            norms: Vec::new(),
            snaps: Vec::new(),
        }
    }

    fn observe(&mut self, st: &SurfaceState) {
        self.norms.push((sobolev_norm(&st.eta, self.s + 0.5), sobolev_norm(&st.psi, self.s)));
        if self.every > 0 && self.seen % self.every == 0 {
            self.snaps.push(st.clone());
        }
        self.seen += 1;
    }

    fn write(&self, out: &mut OutputDir, rec: &TrajectoryRecord) -> std::io::Result<()> {
        let s = self.s;
        out.write("trajectory.csv", |w| {
            writeln!(w, "t,H,eta_H{},psi_H{},mass,eta_rms,psi_rms", s + 0.5, s)?;
            for (x, (ne, np)) in rec.samples.iter().zip(&self.norms) {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    e(x.t),
                    e(x.hamiltonian),
                    e(*ne),
                    e(*np),
                    e(x.mass),
                    e(x.eta_rms),
                    e(x.psi_rms)
                )?;
            }
            Ok(())
        })?;
        for (i, st) in self.snaps.iter().enumerate() {
            out.write(&format!("snapshot_{i:04}_eta.dat"), |w| write_field(&st.eta, w))?;
            out.write(&format!("snapshot_{i:04}_psi.dat"), |w| write_field(&st.psi, w))?;
        }
        Ok(())
    }
}

fn flat_dn_validation(cfg: &ScenarioConfig, out: &mut OutputDir) -> Result<Outcome> {
    let grid = cfg.grid();
    let h = cfg.physics.h;
    let kmax = grid.n() / 3;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let modes: Vec<(f64, f64)> = (0..kmax).map(|_| (rng.gen_range(0.5..1.0), rng.gen_range(0.0..TAU))).collect();
    let f = Field::from_fn(grid, |x| {
        modes.iter().enumerate().map(|(i, (a, ph))| a * ((i + 1) as f64 * x[0] + ph).cos()).sum()
    });
    let gf = dn_apply(&Field::zeros(grid), &f, cfg.dn_config())?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for k in 1..=kmax as i64 {
        let computed = (gf.coeff([k, 0]) / f.coeff([k, 0])).re;
        let exact = k as f64 * (h * k as f64).tanh();
        let rel = (computed - exact).abs() / exact;
        worst = worst.max(rel);
        rows.push((k, computed, exact, rel));
    }
    out.write("flat_dn.csv", |w| {
        writeln!(w, "k,computed,exact,rel_err")?;
        for (k, c, x, r) in &rows {
            writeln!(w, "{k},{},{},{}", e(*c), e(*x), e(*r))?;
        }
        Ok(())
    })?;
    let l2 = (&gf - &dn_flat_exact(&f, h)).dot(&(&gf - &dn_flat_exact(&f, h))).sqrt() / f.dot(&f).sqrt();
    Ok(Outcome::done(json!({ "k_max": kmax, "max_rel_err": worst, "l2_rel_err": l2 })))
}

fn dispersion(cfg: &ScenarioConfig, out: &mut OutputDir) -> Result<Outcome> {
    let model = cfg.model()?;
    let s0 = cfg.initial_state()?;
    let k = cfg.initial.modes.first().map(|m| [m.k[0], m.k.get(1).copied().unwrap_or(0)]);
    let mut series: Vec<(f64, f64, f64)> = Vec::new();
    let mut recorder = Recorder::new(cfg);
    let rec = model.evolve(&s0, &evolve_options(cfg, false), &mut |s| {
        let c = k.map_or(Default::default(), |k| s.eta.coeff(k));
        series.push((s.t, c.re, c.im));
        recorder.observe(s);
    });
    recorder.write(out, &rec)?;
    out.write("mode.csv", |w| {
        writeln!(w, "t,re,im")?;
        for (t, re, im) in &series {
            writeln!(w, "{},{},{}", e(*t), e(*re), e(*im))?;
        }
        Ok(())
    })?;
    let summary = match k {
        None => json!({ "mode": null, "omega": null, "omega_ref": null, "rel_err": null }),
        Some(k) => {
            let kabs = ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
            let reference = linear_frequency(kabs, cfg.params());
            let times: Vec<f64> = series.iter().map(|r| r.0).collect();
            let values: Vec<f64> = series.iter().map(|r| r.1).collect();
            let omega = zero_crossing_frequency(&times, &values);
            json!({
                "mode": k,
                "omega": omega,
                "omega_ref": reference,
                "rel_err": omega.map(|w| (w - reference).abs() / reference),
            })
        }
    };
    Ok(Outcome { summary, abort: abort_info(&rec) })
}

fn conservation(cfg: &ScenarioConfig, out: &mut OutputDir) -> Result<Outcome> {
    let model = cfg.model()?;
    let mut recorder = Recorder::new(cfg);
    let rec = model.evolve(&cfg.initial_state()?, &evolve_options(cfg, true), &mut |s| recorder.observe(s));
    recorder.write(out, &rec)?;
    let h0 = rec.samples.first().map(|s| s.hamiltonian);
    let mass: Vec<f64> = rec.samples.iter().map(|s| s.mass).collect();
    let mass_dev = mass.iter().map(|m| (m - mass[0]).abs()).fold(0.0, f64::max);
    let summary = json!({
        "steps": rec.steps,
        "hamiltonian_0": h0,
        "relative_drift": rec.relative_drift(),
        "mass_deviation": mass_dev,
    });
    Ok(Outcome { summary, abort: abort_info(&rec) })
}

fn paralin_residual(cfg: &ScenarioConfig, out: &mut OutputDir) -> Result<Outcome> {
    let s = cfg.initial_state()?;
    let depth = s.eta.grid().dyadic_depth() as i32;
    let mut rows = Vec::new();
    let ratio = |eta: &Field| -> Result<(f64, f64, f64)> {
        let p = dn_paralinearized(eta, &s.psi, cfg.dn_config())?;
        let (r, x) = (sobolev_norm(&p.residual, 2.0), sobolev_norm(&p.exact, 2.0));
        Ok((r, x, if x > 0.0 { r / x } else { 0.0 }))
    };
    rows.push(("none".to_string(), ratio(&s.eta)?));
    for k in (1..depth).rev() {
        rows.push((format!("S_{k}"), ratio(&low_pass(k, &s.eta))?));
    }
    out.write("paralin.csv", |w| {
        writeln!(w, "smoothing,residual_h2,exact_h2,ratio")?;
        for (label, (r, x, q)) in &rows {
            writeln!(w, "{label},{},{},{}", e(*r), e(*x), e(*q))?;
        }
        Ok(())
    })?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.1 .2).collect();
    Ok(Outcome::done(json!({
        "ratio": ratios[0],
        "smoothed_ratios": &ratios[1..],
    })))
}

fn fit_json(name: &str, fit: &wavelab::Result<OrderFit>, expected: f64) -> Value {
    match fit {
        Ok(f) => json!({ "probe": name, "slope": f.slope, "residual": f.residual, "nominal_order": expected }),
        Err(err) => json!({ "probe": name, "error": err.to_string(), "nominal_order": expected }),
    }
}

fn symbol_calculus(cfg: &ScenarioConfig, out: &mut OutputDir) -> Result<Outcome> {
    let grid = cfg.grid();
    let depth = grid.dyadic_depth();
    let a = composition_test_symbol(grid);
    let mut fits: Vec<(&str, wavelab::Result<OrderFit>, f64)> =
        vec![("composition", composition_defect(&a, &a, 2.0, 3..=depth.saturating_sub(2), cfg.seed), -1.0)];
    let eta = cfg.initial_state()?.eta;
    if eta.max_abs() > 0.0 {
        let sc = SymmetrizerConfig::for_dim(grid.dim());
        match calculus_checks(&eta, sc, 4..=depth.saturating_sub(2), cfg.seed) {
            Ok(c) => {
                fits.push(("symmetry", Ok(c.symmetry), 0.0));
                fits.push(("intertwine_lambda", Ok(c.intertwine_lambda), 0.0));
                fits.push(("intertwine_ell", Ok(c.intertwine_ell), 0.5));
            }
            Err(err) => fits.push(("symmetrizer", Err(err), 0.0)),
        }
    }
    out.write("order_fits.csv", |w| {
        writeln!(w, "probe,nominal_order,slope,intercept,residual")?;
        for (name, fit, expected) in &fits {
            match fit {
                Ok(f) => writeln!(w, "{name},{expected},{},{},{}", e(f.slope), e(f.intercept), e(f.residual))?,
                Err(_) => writeln!(w, "{name},{expected},,,")?,
            }
        }
        Ok(())
    })?;
    out.write("order_samples.csv", |w| {
        writeln!(w, "probe,j,log2_norm")?;
        for (name, fit, _) in &fits {
            if let Ok(f) = fit {
                for (j, v) in &f.samples {
                    writeln!(w, "{name},{j},{}", e(*v))?;
                }
            }
        }
        Ok(())
    })?;
    let list: Vec<Value> = fits.iter().map(|(n, f, x)| fit_json(n, f, *x)).collect();
    Ok(Outcome::done(json!({ "fits": list })))
}

fn symmetrizer_run(cfg: &ScenarioConfig, out: &mut OutputDir) -> Result<Outcome> {
    let model = cfg.model()?;
    let sc = SymmetrizerConfig::for_dim(cfg.grid.dim);
    let mc = cfg.monitor_config();
    let mut opts = evolve_options(cfg, false);
    opts.keep_states = true;
    let mut recorder = Recorder::new(cfg);
    let rec = model.evolve(&cfg.initial_state()?, &opts, &mut |s| recorder.observe(s));
    recorder.write(out, &rec)?;
    let dt = cfg.numerics.dt;
    let mut rows = Vec::new();
    let mut energy = Vec::new();
    let mut worst_rel: f64 = 0.0;
    let mut stopped = None;
    for s in &rec.states {
        let step = model.step_rk4(s, dt).and_then(|s1| Ok((model.step_rk4(&s1, dt)?, s1)));
        let (s2, s1) = match step {
            Ok(v) => v,
            Err(err) => {
                stopped = Some(AbortInfo { t: s.t + dt, last_good_t: s.t, reason: err.to_string() });
                break;
            }
        };
        let f = symmetrized_residual(&model, s, &s1, &s2, sc)?;
        let r = paralinearized_residuals(&model, &s1, sc)?;
        let en = energy_phi(&model, &s1, sc)?;
        let (_, b) = monitor_ab(&model, &s1, mc.eps_star)?;
        worst_rel = worst_rel.max(f.relative_to_data());
        rows.push(ResidualRow { t: s1.t, f1: r.f1_norm, f2: r.f2_norm, big_f: f.norm, phi: f.phi_norm });
        energy.push((s1.t, en, b));
    }
    out.write("residuals.csv", |w| write_residual_series(&rows, w))?;
    out.write("energy.csv", |w| {
        writeln!(w, "t,phi_l2,low,data,ratio,reverse_ratio,B")?;
        for (t, en, b) in &energy {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                e(*t),
                e(en.phi_l2),
                e(en.low),
                e(en.data),
                e(en.ratio()),
                e(en.reverse_ratio()),
                e(*b)
            )?;
        }
        Ok(())
    })?;
    let times: Vec<f64> = energy.iter().map(|r| r.0).collect();
    let phi: Vec<f64> = energy.iter().map(|r| r.1.phi_l2).collect();
    let low: Vec<f64> = energy.iter().map(|r| r.1.low).collect();
    let b: Vec<f64> = energy.iter().map(|r| r.2).collect();
    let ratios: Vec<f64> = energy.iter().map(|r| r.1.ratio()).filter(|r| *r > 0.0).collect();
    let summary = json!({
        "samples": rows.len(),
        "max_f_over_data": worst_rel,
        "energy_ratio_min": ratios.iter().copied().reduce(f64::min),
        "energy_ratio_max": ratios.iter().copied().reduce(f64::max),
        "growth_constant": energy_growth_constant(&times, &phi, &low, &b),
    });
    Ok(Outcome { summary, abort: abort_info(&rec).or(stopped) })
}

fn write_audit(out: &mut OutputDir, audit: &GrowthAudit) -> std::io::Result<()> {
    out.write("growth_audit.csv", |w| {
        writeln!(w, "# {}", GrowthAudit::NOTE)?;
        writeln!(w, "t,lhs,rhs")?;
        for i in 0..audit.times.len() {
            writeln!(w, "{},{},{}", e(audit.times[i]), e(audit.lhs[i]), e(audit.rhs[i]))?;
        }
        Ok(())
    })
}

fn blowup_watch(cfg: &ScenarioConfig, out: &mut OutputDir) -> Result<Outcome> {
    let model = cfg.model()?;
    let mc = cfg.monitor_config();
    let mut opts = evolve_options(cfg, false);
    opts.keep_states = true;
    let mut recorder = Recorder::new(cfg);
    let (rec, diag) = evolve_monitored(&model, &cfg.initial_state()?, &opts, &mc, &mut |s| recorder.observe(s));
    recorder.write(out, &rec)?;
    out.write("diagnostics.csv", |w| diag.write_csv(w))?;
    let audit = growth_bound_audit(&rec.states, mc.s, mc.eps_star, 1.0);
    if let Ok(a) = &audit {
        write_audit(out, a)?;
    }
    let bm = diag.blowup();
    let summary = json!({
        "samples": diag.samples.len(),
        "P_eps": bm.p_eps,
        "int_Q_eps": bm.q_eps_integral,
        "P0_eps": bm.p0_eps,
        "int_Q0_eps": bm.q0_eps_integral,
        "h_min": bm.h_min,
        "A_sup": diag.a_sup,
        "int_B": diag.b_int,
        "M_s": diag.m_st.last(),
        "N_r": diag.n_rt.last(),
        "growth_audit": match &audit {
            Ok(a) => json!({ "sigma": a.sigma, "worst_slack": a.worst_slack, "satisfied": a.satisfied(), "note": GrowthAudit::NOTE }),
            Err(err) => json!({ "error": err.to_string() }),
        },
    });
    Ok(Outcome { summary, abort: abort_info(&rec) })
}

fn contraction(cfg: &ScenarioConfig, out: &mut OutputDir) -> Result<Outcome> {
    let model = cfg.model()?;
    let mc = cfg.monitor_config();
    let s0 = cfg.initial_state()?;
    let pt = cfg.perturbation.as_ref().ok_or_else(|| Error::InvalidParameter("missing perturbation".into()))?;
    let k1 = pt.k.get(1).copied().unwrap_or(0) as f64;
    let bump = Field::from_fn(s0.eta.grid(), |x| pt.delta * (pt.k[0] as f64 * x[0] + k1 * x[1]).cos());
    let s1 = SurfaceState { eta: &s0.eta + &bump, ..s0.clone() };
    let opts = ContractionOptions {
        dt: cfg.numerics.dt,
        t_end: cfg.numerics.t_end,
        stride: cfg.numerics.stride,
        s: mc.s,
        r: mc.r,
    };
    let rep = contraction_harness(&model, &s0, &s1, opts)?;
    out.write("contraction.csv", |w| rep.write_csv(w))?;
    let summary = json!({
        "P_S0": rep.p_s.first(),
        "P_T": rep.p_t,
        "ratio": rep.ratio,
    });
    let abort = rep.abort.as_ref().map(|a| AbortInfo { t: a.t, last_good_t: a.last_good_t, reason: a.reason.clone() });
    Ok(Outcome { summary, abort })
}
