//! Artifact emission: CSV time series, run metadata, and plot-ready data.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dynamics::{Protocol, RunOutcome};

use super::runner::RunRecord;

fn fnum(x: f64) -> String {
    format!("{x:.15e}")
}

/// Writes `functionals.csv`, `traces.csv`, `snapshots.csv` and `meta.txt`.
pub fn write_outputs(record: &RunRecord, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;

    let mut functionals = String::from("t,v1,v,vbar,vr,d1_h2n,mass,sup_gap\n");
    for s in &record.data.samples {
        let _ = writeln!(
            functionals,
            "{},{},{},{},{},{},{},{}",
            fnum(s.t),
            fnum(s.v1),
            fnum(s.v),
            fnum(s.vbar),
            fnum(s.vr),
            fnum(s.d1_h2n),
            fnum(s.mass),
            fnum(s.sup_gap)
        );
    }
    fs::write(dir.join("functionals.csv"), functionals)?;

    let mut traces = String::from("t,agent,q_right,u,psi\n");
    for tr in &record.data.traces {
        for i in 0..tr.q_right.len() {
            let _ = writeln!(
                traces,
                "{},{},{},{},{}",
                fnum(tr.t),
                i + 1,
                fnum(tr.q_right[i]),
                fnum(tr.u[i]),
                fnum(tr.psi[i])
            );
        }
    }
    fs::write(dir.join("traces.csv"), traces)?;

    let mut snapshots = String::from("t,agent,node,s,q\n");
    for (t, field) in &record.data.snapshots {
        let grid = field.grid();
        for i in 0..field.agent_count() {
            for j in 0..grid.node_count() {
                let _ = writeln!(
                    snapshots,
                    "{},{},{},{},{}",
                    fnum(*t),
                    i + 1,
                    j,
                    fnum(grid.node(j)),
                    fnum(field.values()[(i, j)])
                );
            }
        }
    }
    fs::write(dir.join("snapshots.csv"), snapshots)?;

    fs::write(dir.join("meta.txt"), metadata_text(record))?;
    Ok(())
}

fn metadata_text(record: &RunRecord) -> String {
    let s = &record.scenario;
    let mut m = String::new();
    let _ = writeln!(m, "scenario = {}", s.name);
    let _ = writeln!(m, "agents = {}", s.topology.agent_count());
    let _ = writeln!(m, "edges = {:?}", s.topology.edges());
    let _ = writeln!(m, "grid_nodes = {}", s.grid.node_count());
    let _ = writeln!(m, "diffusivity = {}", fnum(s.params.diffusivity));
    match &s.protocol {
        Protocol::Linear => {
            let _ = writeln!(m, "protocol = linear");
        }
        Protocol::Sliding { gains, dead_band } => {
            let _ = writeln!(m, "protocol = sliding");
            let _ = writeln!(
                m,
                "gains = a={} b={} w1={} w2={} w3={}",
                gains.a, gains.b, gains.w1, gains.w2, gains.w3
            );
            let _ = writeln!(m, "dead_band = {}", fnum(*dead_band));
        }
    }
    let _ = writeln!(m, "disturbance_kind = {:?}", s.disturbance.kind());
    let _ = writeln!(
        m,
        "disturbance_k = [{}]",
        s.disturbance
            .k()
            .iter()
            .map(|v| fnum(*v))
            .collect::<Vec<_>>()
            .join(", ")
    );
    if let Some(alpha) = s.disturbance.alpha() {
        let _ = writeln!(
            m,
            "disturbance_alpha = [{}]",
            alpha.iter().map(|v| fnum(*v)).collect::<Vec<_>>().join(", ")
        );
    }
    if let Some(seed) = s.disturbance.seed() {
        let _ = writeln!(m, "disturbance_seed = {seed}");
    }
    let _ = writeln!(m, "dt = {}", fnum(s.config.dt));
    let _ = writeln!(m, "t_end = {}", fnum(s.config.t_end));
    let _ = writeln!(m, "record_stride = {}", s.config.record_stride);
    let _ = writeln!(m, "lambda2 = {}", fnum(record.spectrum.lambda2()));
    let _ = writeln!(m, "lambda_n = {}", fnum(record.spectrum.lambda_n()));
    let _ = writeln!(m, "q_star = {}", fnum(record.target.q_star));
    if let Some(bound) = &record.rate_bound {
        let _ = writeln!(m, "rate_bound = {}", fnum(bound.spec_bound));
        let _ = writeln!(m, "rate_bound_apriori = {}", fnum(bound.apriori_bound));
    }
    if let Some(report) = &record.gains_report {
        let _ = writeln!(m, "gains_compliant = {}", report.compliant());
        for c in &report.checks {
            let _ = writeln!(m, "gain_check[{}] = margin {}", c.name, fnum(c.margin));
        }
    }
    if let Some(c) = &record.certificate {
        let _ = writeln!(m, "alpha1 = {}", fnum(c.alpha1));
        let _ = writeln!(m, "alpha2 = {}", fnum(c.alpha2));
        let _ = writeln!(m, "alpha2_entrywise = {}", fnum(c.alpha2_entrywise));
        let _ = writeln!(m, "kappa_max = {}", fnum(c.kappa_max));
        let _ = writeln!(m, "kappa_r = {}", fnum(c.kappa_r));
        let _ = writeln!(
            m,
            "c = [{}, {}, {}, {}]",
            fnum(c.c1),
            fnum(c.c2),
            fnum(c.c3),
            fnum(c.c4)
        );
        let _ = writeln!(m, "gamma1 = {}", fnum(c.gamma1));
        let _ = writeln!(m, "gamma2 = {}", fnum(c.gamma2));
        let _ = writeln!(m, "rho_r = {}", fnum(c.rho_r));
        let _ = writeln!(m, "r_level = {}", fnum(c.r_level));
    }
    let _ = writeln!(
        m,
        "ics_compatible = {} (residual {}, tol {})",
        record.data.ics_compatible,
        fnum(record.data.compatibility_residual),
        fnum(record.data.compatibility_tol)
    );
    match record.data.outcome {
        RunOutcome::Completed => {
            let _ = writeln!(m, "outcome = completed");
        }
        RunOutcome::Blowup { time } => {
            let _ = writeln!(m, "outcome = blowup at t = {}", fnum(time));
        }
    }
    if let Some(excess) = record.data.max_rate_excess {
        let _ = writeln!(m, "max_rate_excess = {}", fnum(excess));
    }
    let _ = writeln!(m, "trend = {}", record.monitor.trend);
    let _ = writeln!(m, "v1_max_excess = {}", fnum(record.monitor.v1_max_excess));
    let _ = writeln!(m, "mass_max_drift = {}", fnum(record.monitor.mass_max_drift));
    if let Some(r) = record.monitor.vr_decay_max_ratio {
        let _ = writeln!(m, "vr_decay_max_ratio = {}", fnum(r));
    }
    for v in &record.verdicts {
        let _ = writeln!(
            m,
            "verdict[{}] = {} ({})",
            v.name,
            if v.pass { "pass" } else { "fail" },
            v.detail
        );
    }
    m
}

/// Emits plot-ready data: the disagreement-norm decay curve as an SVG, a
/// surface grid for one representative agent, and the pointwise mismatch
/// between two agents over space-time.
pub fn emit_plots(record: &RunRecord, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let n = record.scenario.topology.agent_count();
    let show = 6.min(n); // the agent the reference figures feature
    let other = n;

    let mut surface = String::from("t,s,q\n");
    let mut mismatch = String::from("t,s,dq\n");
    for (t, field) in &record.data.frames {
        let grid = field.grid();
        for j in 0..grid.node_count() {
            let _ = writeln!(
                surface,
                "{},{},{}",
                fnum(*t),
                fnum(grid.node(j)),
                fnum(field.values()[(show - 1, j)])
            );
            let _ = writeln!(
                mismatch,
                "{},{},{}",
                fnum(*t),
                fnum(grid.node(j)),
                fnum(field.values()[(show - 1, j)] - field.values()[(other - 1, j)])
            );
        }
    }
    fs::write(dir.join(format!("surface_agent_{show}.csv")), surface)?;
    fs::write(dir.join(format!("mismatch_{show}_{other}.csv")), mismatch)?;

    fs::write(dir.join("disagreement.svg"), disagreement_svg(record))?;
    Ok(())
}

/// Log-scale polyline of the disagreement norm over time.
fn disagreement_svg(record: &RunRecord) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let samples = &record.data.samples;
    let floor = 1e-16f64;
    let t0 = samples.first().map(|s| s.t).unwrap_or(0.0);
    let t1 = samples.last().map(|s| s.t).unwrap_or(1.0).max(t0 + 1e-12);
    let logs: Vec<f64> = samples
        .iter()
        .map(|s| s.d1_h2n.max(floor).log10())
        .collect();
    let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi - lo < 1e-9 {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    };
    let points: Vec<String> = samples
        .iter()
        .zip(&logs)
        .map(|(s, &l)| {
            let x = PAD + (s.t - t0) / (t1 - t0) * (W - 2.0 * PAD);
            let y = H - PAD - (l - lo) / (hi - lo) * (H - 2.0 * PAD);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<line x1=\"{pad}\" y1=\"{hb}\" x2=\"{wr}\" y2=\"{hb}\" stroke=\"black\"/>\n",
            "<line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{hb}\" stroke=\"black\"/>\n",
            "<text x=\"{xm}\" y=\"{xl}\" text-anchor=\"middle\" font-size=\"13\">t in [{t0}, {t1}]</text>\n",
            "<text x=\"14\" y=\"{ym}\" text-anchor=\"middle\" font-size=\"13\" ",
            "transform=\"rotate(-90 14 {ym})\">log10 disagreement H2-norm in [{lo:.2}, {hi:.2}]</text>\n",
            "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"{pts}\"/>\n",
            "</svg>\n"
        ),
        w = W,
        h = H,
        pad = PAD,
        hb = H - PAD,
        wr = W - PAD,
        xm = W / 2.0,
        xl = H - 14.0,
        ym = H / 2.0,
        t0 = t0,
        t1 = t1,
        lo = lo,
        hi = hi,
        pts = points.join(" ")
    )
}
