use std::fmt::Write as _;

use multiarm::case_study::{table2, table3};
use multiarm::design_known::{borderline_threshold, boundary_curve, optimal_design, BoundaryGrid, BoundaryKind};
use multiarm::design_unknown::{gamma_update, sample_size_unknown};
use multiarm::dunnett::{
    dunnett_critical, dunnett_design, dunnett_pvalue, pairwise_unadjusted_design, z_statistics, ZMode,
};
use multiarm::mc_oracle::mc_posterior_probs;
use multiarm::posterior::{decide, update, TrialData};
use multiarm::{DesignResult, Error, PrecisionModel, PrecisionSpec, Result};

use crate::config::{AnalysisPrecision, Resolved};
use crate::output::{csv_line, f4, Output};

fn design_header(k: usize) -> String {
    let mut cols = vec!["design".to_string(), "total".into()];
    cols.extend((0..=k).map(|j| format!("n{j}")));
    cols.extend(["info_target".into(), "required_d1".into(), "d1_achieved".into()]);
    cols.extend((0..=k).map(|j| format!("fractional_n{j}")));
    csv_line(&cols)
}

fn design_row(label: &str, d: &DesignResult) -> String {
    let mut cols = vec![label.to_string(), d.total.to_string()];
    cols.extend(d.n.iter().map(|n| n.to_string()));
    cols.extend([d.info_target, d.required_d1, d.d1_achieved].map(|x| x.to_string()));
    cols.extend(d.fractional_n.iter().map(|x| x.to_string()));
    csv_line(&cols)
}

fn describe_design(out: &mut String, label: &str, d: &DesignResult) {
    let sizes: Vec<String> = d.n.iter().map(|n| n.to_string()).collect();
    let _ = writeln!(out, "{label}");
    let _ = writeln!(out, "  sizes (control first): ({})", sizes.join(", "));
    let _ = writeln!(out, "  total: {}", d.total);
    let _ = writeln!(out, "  information target: {}", f4(d.info_target));
    let _ = writeln!(out, "  required D1: {}  achieved: {}", f4(d.required_d1), f4(d.d1_achieved));
    let frac: Vec<String> = d.fractional_n.iter().map(|x| f4(*x)).collect();
    let _ = writeln!(out, "  unrounded sizes: ({})", frac.join(", "));
}

pub fn design_known(cfg: &Resolved, criterion: Option<u8>) -> Result<Output> {
    let config = cfg.design()?;
    if !matches!(config.precision, PrecisionSpec::Known { .. }) {
        return Err(Error::InvalidConfig(
            "design-known needs `v` or `sd` in [design]; use design-unknown for a precision prior".into(),
        ));
    }
    let mut out = Output::new("design_known", cfg);
    let mut csv = design_header(config.k);
    for c in cfg.criteria(criterion)? {
        let d = optimal_design(config, c)?;
        let label = format!("criterion {}", c.number());
        describe_design(&mut out.report, &format!("Bayesian design, {label}"), &d);
        let t = borderline_threshold(config, d.d1_achieved)?;
        let _ = writeln!(out.report, "  proceed threshold on each posterior difference: {}", f4(t));
        csv.push_str(&design_row(&label, &d));
    }
    out.csv("design_known.csv", csv);
    Ok(out)
}

pub fn design_unknown(cfg: &Resolved, criterion: Option<u8>) -> Result<Output> {
    let config = cfg.design()?;
    let prior = cfg.precision_prior()?;
    let mut out = Output::new("design_unknown", cfg);
    let _ = writeln!(
        out.report,
        "precision prior: Gamma({}, {}), mean {}, assurance {}",
        f4(prior.alpha0),
        f4(prior.beta0),
        f4(prior.mean()),
        f4(prior.xi)
    );
    let mut csv = design_header(config.k);
    for c in cfg.criteria(criterion)? {
        let d = sample_size_unknown(config, prior, c)?;
        let label = format!("criterion {}", c.number());
        describe_design(&mut out.report, &format!("Bayesian design, {label}, unknown precision"), &d);
        csv.push_str(&design_row(&label, &d));
    }
    out.csv("design_unknown.csv", csv);
    Ok(out)
}

fn analysis_model(cfg: &Resolved, data: &TrialData) -> Result<(PrecisionModel, Option<String>)> {
    let config = cfg.design()?;
    let choice = cfg.analysis_precision.unwrap_or(match config.precision {
        PrecisionSpec::Known { .. } => AnalysisPrecision::Known,
        PrecisionSpec::Gamma(_) => AnalysisPrecision::Gamma,
    });
    match choice {
        AnalysisPrecision::Known => Ok((PrecisionModel::CommonKnown(config.known_v()?), None)),
        AnalysisPrecision::PerGroup => {
            let sds = data
                .arms
                .iter()
                .enumerate()
                .map(|(j, a)| {
                    a.sample_sd()
                        .ok_or_else(|| Error::InvalidConfig(format!("data.arm[{j}]: per-group precision needs n >= 2")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((PrecisionModel::per_group_from_sd(&sds), None))
        }
        AnalysisPrecision::Gamma => {
            let prior = cfg.precision_prior()?;
            let u = gamma_update(&config.priors, prior, data)?;
            let note = format!(
                "precision posterior: Gamma({}, {}), mean {}, sd equivalent {}",
                f4(u.alpha1),
                f4(u.beta1),
                f4(u.alpha1 / u.beta1),
                f4((u.beta1 / u.alpha1).sqrt())
            );
            Ok((
                PrecisionModel::GammaPosterior {
                    alpha1: u.alpha1,
                    beta1: u.beta1,
                },
                Some(note),
            ))
        }
    }
}

pub fn analyze(cfg: &Resolved) -> Result<Output> {
    let config = cfg.design()?;
    let data = cfg.data.clone().unwrap_or_else(|| TrialData::empty(config.k));
    let summary = update(&config.priors, &data)?;
    let (model, note) = analysis_model(cfg, &data)?;
    let d = decide(&summary, &model, config)?;
    let mut out = Output::new("analyze", cfg);
    if data.total() == 0 {
        let _ = writeln!(out.report, "no observations: the posterior equals the prior");
    }
    if let Some(n) = note {
        let _ = writeln!(out.report, "{n}");
    }
    let mut csv = csv_line(&["arm", "n", "mean", "mu1", "q1", "delta1", "pi"]);
    let _ = writeln!(out.report, "arm  n  posterior mean  posterior q  difference  Pi_j");
    for j in 0..=config.k {
        let a = &data.arms[j];
        let (delta, pi) = if j == 0 {
            (String::new(), String::new())
        } else {
            (summary.delta1(j).to_string(), d.pi[j - 1].to_string())
        };
        csv.push_str(&csv_line(&[
            j.to_string(),
            a.n.to_string(),
            a.mean.to_string(),
            summary.mu1[j].to_string(),
            summary.q1[j].to_string(),
            delta,
            pi,
        ]));
        if j == 0 {
            let _ = writeln!(out.report, "{j}  {}  {}  {}", a.n, f4(summary.mu1[j]), f4(summary.q1[j]));
        } else {
            let _ = writeln!(
                out.report,
                "{j}  {}  {}  {}  {}  {}",
                a.n,
                f4(summary.mu1[j]),
                f4(summary.q1[j]),
                f4(summary.delta1(j)),
                f4(d.pi[j - 1])
            );
        }
    }
    let promising: Vec<String> = d.promising_set.iter().map(|j| j.to_string()).collect();
    let _ = writeln!(out.report, "Pi*: {}", f4(d.pi_star));
    let _ = writeln!(out.report, "Gamma at delta*: {}", f4(d.gamma));
    let _ = writeln!(out.report, "promising arms: {{{}}}", promising.join(", "));
    let _ = writeln!(out.report, "decision: {:?}", d.classification);
    if let Some(n) = d.note {
        let _ = writeln!(out.report, "note: {n}");
    }
    out.csv("analyze.csv", csv);
    let mut dec = csv_line(&["pi_star", "gamma", "pi_star_met", "abandon", "classification", "promising"]);
    dec.push_str(&csv_line(&[
        d.pi_star.to_string(),
        d.gamma.to_string(),
        d.pi_star_met.to_string(),
        d.abandon.to_string(),
        format!("{:?}", d.classification),
        promising.join(" "),
    ]));
    out.csv("analyze_decision.csv", dec);
    Ok(out)
}

pub fn dunnett(cfg: &Resolved) -> Result<Output> {
    let dc = cfg
        .dunnett
        .ok_or_else(|| Error::InvalidConfig("missing required section [dunnett]".into()))?;
    let mut out = Output::new("dunnett", cfg);
    let d = dunnett_design(&dc)?;
    let r = dc.ratio();
    let mut sizes = vec![r];
    sizes.extend(std::iter::repeat_n(1.0, dc.k));
    let c = dunnett_critical(dc.alpha, &sizes, None)?;
    let _ = writeln!(out.report, "critical value: {}", f4(c));
    describe_design(&mut out.report, "Dunnett design", &d);
    let p = pairwise_unadjusted_design(&dc)?;
    describe_design(&mut out.report, "unadjusted pairwise design", &p);
    let mut csv = design_header(dc.k);
    csv.push_str(&design_row("dunnett", &d));
    csv.push_str(&design_row("pairwise unadjusted", &p));
    out.csv("dunnett.csv", csv);
    if let Some(data) = &cfg.data {
        let sds = data
            .arms
            .iter()
            .enumerate()
            .map(|(j, a)| {
                a.sample_sd()
                    .ok_or_else(|| Error::InvalidConfig(format!("data.arm[{j}]: the test needs n >= 2")))
            })
            .collect::<Result<Vec<_>>>()?;
        let z = z_statistics(data, ZMode::PooledPerPair)?;
        let (best, z_star) = z
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j + 1, v) } else { acc });
        let pv = dunnett_pvalue(data, &sds, z_star)?;
        let zs: Vec<String> = z.iter().map(|v| f4(*v)).collect();
        let _ = writeln!(out.report, "test statistics: ({})", zs.join(", "));
        let _ = writeln!(out.report, "largest: arm {best}, z = {}", f4(z_star));
        let _ = writeln!(out.report, "p-value: {pv:.4e}");
        let mut t = csv_line(&["arm", "z", "max", "p_value"]);
        for (j, v) in z.iter().enumerate() {
            let is_max = j + 1 == best;
            t.push_str(&csv_line(&[
                (j + 1).to_string(),
                v.to_string(),
                is_max.to_string(),
                if is_max { pv.to_string() } else { String::new() },
            ]));
        }
        out.csv("dunnett_test.csv", t);
    }
    Ok(out)
}

pub fn boundary(cfg: &Resolved, criterion: Option<u8>) -> Result<Output> {
    let config = cfg.design()?;
    if config.k != 2 {
        return Err(Error::Unsupported(format!(
            "boundary curves need k = 2 (got k = {}); use design-known, which reports the per-coordinate proceed threshold",
            config.k
        )));
    }
    let v = config.known_v()?;
    let b = cfg.boundary.expect("resolved with design");
    let grid = BoundaryGrid {
        start: b.start,
        end: b.end,
        step: b.step,
    };
    let q0: Vec<f64> = config.priors.iter().map(|p| p.q0).collect();
    let mut out = Output::new("boundary", cfg);
    for c in cfg.criteria(criterion)? {
        let d = optimal_design(config, c)?;
        let curves = boundary_curve(config, &d, config.delta_star, &grid)?;
        let n = c.number();
        let _ = writeln!(out.report, "criterion {n}, design total {}", d.total);
        let t: Vec<String> = curves.proceed_thresholds.iter().map(|x| f4(*x)).collect();
        let _ = writeln!(out.report, "  proceed thresholds: ({})", t.join(", "));
        let _ = writeln!(out.report, "  abandon asymptote: {}", f4(curves.abandon_asymptote));
        for w in &curves.warnings {
            let _ = writeln!(out.report, "  warning: {w}");
        }
        let mut csv = format!("# criterion={n}\n");
        csv.push_str(&csv_line(&["boundary", "delta11", "delta12"]));
        for p in &curves.polylines {
            let label = match p.kind {
                BoundaryKind::Proceed => "proceed",
                BoundaryKind::Abandon => "abandon",
            };
            for &(x, y) in &p.points {
                csv.push_str(&csv_line(&[label.to_string(), x.to_string(), y.to_string()]));
            }
        }
        // Monte Carlo spot check at the abandon point closest to delta11 = 0
        let abandon = curves.polylines.iter().find(|p| p.kind == BoundaryKind::Abandon);
        if let Some(&(x, y)) = abandon.and_then(|p| {
            p.points
                .iter()
                .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
        }) {
            let s = multiarm::PosteriorSummary {
                mu1: vec![0.0, x, y],
                q1: d.posterior_information(&q0),
            };
            let mc = mc_posterior_probs(&s, &PrecisionModel::CommonKnown(v), &[config.delta_star], &cfg.mc)?;
            let g = mc.gamma[0];
            let _ = writeln!(
                out.report,
                "  Monte Carlo check at ({}, {}): Gamma = {} (se {}, target {}, z {})",
                f4(x),
                f4(y),
                f4(g.estimate),
                f4(g.std_error),
                f4(config.zeta),
                f4(g.z_score(config.zeta))
            );
        }
        out.csv(&format!("boundary_c{n}.csv"), csv);
    }
    Ok(out)
}

pub fn reproduce_tables(cfg: &Resolved) -> Result<Output> {
    let mut out = Output::new("reproduce_tables", cfg);
    let mut t2 = csv_line(&[
        "design",
        "experimental",
        "control",
        "total",
        "expected_experimental",
        "expected_control",
        "expected_total",
        "pass",
    ]);
    let _ = writeln!(out.report, "Known-precision designs (experimental, control, total):");
    for r in table2()? {
        t2.push_str(&csv_line(&[
            r.design.clone(),
            r.experimental.to_string(),
            r.control.to_string(),
            r.total.to_string(),
            r.expected.0.to_string(),
            r.expected.1.to_string(),
            r.expected.2.to_string(),
            pass(r.pass()),
        ]));
        let _ = writeln!(
            out.report,
            "  {}: ({}, {}, {}) reference {:?} {}",
            r.design,
            r.experimental,
            r.control,
            r.total,
            r.expected,
            pass(r.pass())
        );
    }
    out.csv("table2.csv", t2);

    let mut t3 = csv_line(&[
        "alpha0",
        "beta0",
        "prior_mean_v",
        "prior_prob_sd_at_least_15",
        "xi",
        "c1_experimental",
        "c1_control",
        "c1_total",
        "c2_experimental",
        "c2_control",
        "c2_total",
        "expected_prob_sd",
        "expected_c1_experimental",
        "expected_c1_control",
        "expected_c1_total",
        "expected_c2_experimental",
        "expected_c2_control",
        "expected_c2_total",
        "pass",
    ]);
    let _ = writeln!(out.report, "Unknown-precision designs, each size within 1 patient:");
    for r in table3()? {
        let ok = pass(r.pass(1));
        let cells = [
            r.c1.0, r.c1.1, r.c1.2, r.c2.0, r.c2.1, r.c2.2,
        ];
        let expected = [
            r.expected_c1.0,
            r.expected_c1.1,
            r.expected_c1.2,
            r.expected_c2.0,
            r.expected_c2.1,
            r.expected_c2.2,
        ];
        let mut cols = vec![
            r.alpha0.to_string(),
            r.beta0.to_string(),
            r.prior_mean_v.to_string(),
            r.prior_prob_sd.to_string(),
            r.xi.to_string(),
        ];
        cols.extend(cells.iter().map(|x| x.to_string()));
        cols.push(r.expected_prob_sd.to_string());
        cols.extend(expected.iter().map(|x| x.to_string()));
        cols.push(ok.clone());
        t3.push_str(&csv_line(&cols));
        let _ = writeln!(
            out.report,
            "  alpha0 = {}, xi = {}: P(sd >= 15) = {}; C1 {:?}; C2 {:?} {ok}",
            f4(r.alpha0),
            f4(r.xi),
            f4(r.prior_prob_sd),
            r.c1,
            r.c2
        );
    }
    out.csv("table3.csv", t3);
    Ok(out)
}

fn pass(ok: bool) -> String {
    if ok { "pass" } else { "fail" }.to_string()
}
