use std::fs::File;
use std::path::{Path, PathBuf};

use jacobi_renorm::darboux::*;
use jacobi_renorm::limitper::*;
use jacobi_renorm::measures::*;
use jacobi_renorm::renorm::*;
use jacobi_renorm::{HyperbolicPoly, JacobiWindow, PolySequence, PolySpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig};
use crate::report::{write_json, Report};

pub enum RunError {
    /// Exit code 2.
    Config(String),
    /// Exit code 1.
    Numeric(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.0)
    }
}

impl From<jacobi_renorm::Error> for RunError {
    fn from(e: jacobi_renorm::Error) -> Self {
        RunError::Numeric(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Numeric(format!("i/o: {e}"))
    }
}

pub type RunResult = Result<Report, RunError>;

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub tol_scale: f64,
}

impl Ctx {
    fn tol(&self, name: &str) -> f64 {
        self.cfg.tol(name, self.tol_scale)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn create(&self, name: &str) -> Result<File, RunError> {
        Ok(File::create(self.path(name))?)
    }

    fn rng(&self) -> Result<ChaCha8Rng, RunError> {
        let seed = self.cfg.rng_seed.ok_or_else(|| {
            RunError::Config("randomized checks need an RNG seed (--seed or rng_seed)".into())
        })?;
        Ok(ChaCha8Rng::seed_from_u64(seed))
    }
}

fn write_trace(ctx: &Ctx, trace: &Value) -> Result<(), RunError> {
    write_json(&ctx.path("trace.json"), trace)?;
    Ok(())
}

/// One renormalization step with the full identity suite.
pub fn renorm(ctx: &Ctx) -> RunResult {
    let t = ctx.cfg.poly.build()?;
    let delta = ctx.cfg.branch_vector(&t)?;
    let half = ctx.cfg.half_window();
    let seed = ctx.cfg.seed_matrix.build(half)?;
    let d = t.degree() as i64;
    let out_half = d * (half - 32).max(1);
    let j = renormalize(&seed, &delta, &t, -out_half..=out_half)?;
    j.write_csv(ctx.create("coefficients.csv")?)?;

    let mut rep = Report::default();
    let frame = MonicFrame::new(&seed, &t)?;
    let bl = blocks(&frame.seed, -20..=20, &delta, &frame.poly)?;
    rep.at_most("recurrence", check_recurrence(&bl, &frame.seed, &frame.poly)?, ctx.tol("recurrence"));
    let mut sigma = 0.0f64;
    for b in &bl {
        let (_, r1, r2) = sigma_s(b, &frame.seed, &frame.poly)?;
        sigma = sigma.max(r1).max(r2);
    }
    rep.at_most("sigma", sigma, ctx.tol("sigma"));
    let opts = SectionCheck::new(&t, 0);
    let eq = check_renorm_equation(&j, &seed, &t, &opts)?;
    rep.at_most("renorm_equation", eq.residual, ctx.tol("renorm_equation"));
    rep.at_most("renorm_equation_half_section", eq.residual_half, ctx.tol("renorm_equation"));
    rep.value("renorm_equation_truncation_consistent", eq.truncation_consistent);
    let (f1, f2) = check_polynomial_form(&j, &seed, &t, &opts)?;
    rep.at_most("polynomial_form", f1.max(f2), ctx.tol("polynomial_form"));
    rep.at_most("re0", check_re0(&j, &seed, &t, &default_z_samples(&t))?, ctx.tol("re0"));
    rep.at_most("dual_branch", dual_branch_check(&seed, &delta, &t, -50..=50)?, ctx.tol("dual_branch"));
    write_trace(ctx, &json!({ "steps": 1, "final": j }))?;
    Ok(rep)
}

fn tower(cfg: &RunConfig) -> Result<PolySequence, RunError> {
    let polys: Vec<HyperbolicPoly> = match &cfg.tower {
        Some(specs) => specs.iter().map(PolySpec::build).collect::<Result<_, _>>()?,
        None => vec![cfg.poly.build()?; cfg.steps],
    };
    Ok(PolySequence::new(polys)?)
}

/// Fixed-point or tower iteration with contraction and limit-periodicity checks.
pub fn iterate(ctx: &Ctx) -> RunResult {
    let ts = tower(&ctx.cfg)?;
    let first = &ts.polys()[0];
    let policy = match &ctx.cfg.eps {
        Some(eps) => BranchPolicy::Sequence { eps: eps.clone() },
        None => {
            for t in ts.polys() {
                ctx.cfg.branch_vector(t)?;
            }
            BranchPolicy::Fixed { delta: ctx.cfg.branch_vector(first)? }
        }
    };
    let half = ctx.cfg.half_window();
    let j0 = ctx.cfg.seed_matrix.build(half)?;
    let opts = IterateOptions { force: ctx.cfg.force, ..Default::default() };
    let tr = iterate_sequence(&ts, &policy, &j0, -half..=half, &opts)?;
    tr.last().write_csv(ctx.create("coefficients.csv")?)?;

    let mut rep = Report::default();
    let kappa = ts.polys().iter().map(|t| t.kappa_bound()).fold(0.0, f64::max);
    let ratio = tr.max_ratio_from(1);
    if tr.step_distances.len() >= 2 {
        rep.at_most("contraction_ratio", ratio, kappa + ctx.tol("contraction_slack"));
    }
    rep.value("kappa_bound", kappa);
    rep.value("step_distances", &tr.step_distances);
    let degrees = ts.degrees();
    if degrees.windows(2).all(|w| w[0] == w[1]) && ratio.is_finite() && ratio > 0.0 {
        let split = split_check(&tr, degrees[0], first.xi(), ratio.min(1.0))?;
        rep.at_most("split_p0", split.p0, split.p0_bound);
        let worst = split.layer_max.iter().zip(&split.layer_bound).map(|(a, b)| a / b).fold(0.0, f64::max);
        rep.at_most("split_layers", worst, 1.0);
    }
    let prof = ap_profile(tr.last(), &degrees, 8, 3, first.xi())?;
    rep.at_most("ap_kappa_fit", prof.kappa_fit, GEOMETRIC_FIT_MAX);
    rep.value("ap_kappa_envelope", prof.kappa_envelope);
    write_trace(
        ctx,
        &json!({
            "steps": tr.iterates.len() - 1,
            "step_distances": tr.step_distances,
            "empirical_ratio": tr.empirical_ratio,
            "stop": tr.stop,
            "final": tr.last(),
        }),
    )?;
    Ok(rep)
}

#[derive(Default)]
pub struct OracleArgs {
    pub compare: Option<PathBuf>,
}

fn read_final(path: &Path) -> Result<JacobiWindow, RunError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    let v: Value =
        serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_value(v["final"].clone())
        .map_err(|e| RunError::Config(format!("{}: no usable \"final\" window: {e}", path.display())))
}

fn write_coeffs(ctx: &Ctx, name: &str, c: &OneSided) -> Result<(), RunError> {
    let mut w =
        csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(ctx.create(name)?);
    let e = |e: csv::Error| RunError::Numeric(e.to_string());
    w.write_record(["k", "q", "p"]).map_err(e)?;
    for (k, (q, p)) in c.q.iter().zip(&c.p).enumerate() {
        w.write_record([k.to_string(), format!("{q:.16e}"), format!("{p:.16e}")]).map_err(e)?;
    }
    w.flush()?;
    Ok(())
}

/// Measure oracles: balanced measure and optionally the `L₂` eigenmeasure.
pub fn oracle(ctx: &Ctx, args: &OracleArgs) -> RunResult {
    let t = ctx.cfg.poly.build()?;
    let oc = &ctx.cfg.oracle;
    let m = balanced_measure(&t, oc.depth)?;
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(ctx.create("measure.csv")?);
        let e = |e: csv::Error| RunError::Numeric(e.to_string());
        w.write_record(["point", "weight"]).map_err(e)?;
        for (x, wt) in m.points.iter().zip(&m.weights) {
            w.write_record([format!("{x:.16e}"), format!("{wt:.16e}")]).map_err(e)?;
        }
        w.flush()?;
    }
    let c = jacobi_from_measure(&m, oc.n_coeffs)?;
    write_coeffs(ctx, "coeffs.csv", &c)?;

    let mut rep = Report::default();
    rep.value("within_exactness_margin", within_exactness_margin(&m, oc.n_coeffs));
    rep.at_most("moment_consistency", moment_consistency(&m, &c, t.xi()), ctx.tol("moment_consistency"));
    rep.at_most("moment_stability", moment_stability(&t, &m, 6)?, ctx.tol("moment_stability"));
    rep.at_most(
        "balanced_identity",
        balanced_renorm_identity(&t, &m, &default_z_samples(&t)),
        ctx.tol("balanced_identity"),
    );
    let fixed = args.compare.as_deref().map(read_final).transpose()?;
    let mut comparison = serde_json::Map::new();
    if let Some(j) = &fixed {
        let dev = max_deviation(&c, &right_half(j, oc.n_coeffs)?);
        rep.at_most("balanced_deviation", dev, ctx.tol("balanced_deviation"));
        comparison.insert("balanced_deviation".into(), json!(dev));
    }
    if oc.ruelle {
        let e = ruelle_l2_eigen(&t, oc.ruelle_depth)?;
        rep.value("rho_ruelle", e.rho_ruelle);
        rep.at_most("ruelle_eigen", ruelle_eigen_residual(&t, &e)?, ctx.tol("ruelle_eigen"));
        let rc = jacobi_from_measure(&e.measure, oc.n_coeffs)?;
        write_coeffs(ctx, "ruelle_coeffs.csv", &rc)?;
        comparison.insert("rho_ruelle".into(), json!(e.rho_ruelle));
        if let Some(j) = &fixed {
            let dev = max_deviation(&rc, &left_half_reflected(j, oc.n_coeffs)?);
            rep.at_most("ruelle_deviation", dev, ctx.tol("ruelle_deviation"));
            comparison.insert("ruelle_deviation".into(), json!(dev));
        }
    }
    write_json(&ctx.path("comparison.json"), &Value::Object(comparison))?;
    Ok(rep)
}

/// Even/odd splitting, factorization identities and the Lipschitz sweep.
pub fn darboux(ctx: &Ctx) -> RunResult {
    let dc = &ctx.cfg.darboux;
    let rho = dc.rho;
    let t = HyperbolicPoly::quadratic(rho)?;
    let half = ctx.cfg.half_window();
    let jt = ctx.cfg.seed_matrix.build(half)?;
    let out_half = 2 * (half - 32).max(1);
    let j = renormalize(&jt, &BranchVector::minus(1), &t, -out_half..=out_half)?;
    let mut rep = Report::default();
    let (phi, zero) = match split_even_odd(&j) {
        Ok(r) => r,
        Err(jacobi_renorm::Error::NonzeroDiagonal { residual }) => {
            rep.at_most("zero_diagonal", residual, ctx.tol("zero_diagonal"));
            return Ok(rep);
        }
        Err(e) => return Err(e.into()),
    };
    rep.at_most("zero_diagonal", zero, ctx.tol("zero_diagonal"));
    phi.write_csv(ctx.create("phi.csv")?)?;
    let chk = check_darboux(&phi, &jt, rho)?;
    rep.at_most("res_in", chk.res_in, ctx.tol("factorization"));
    rep.at_most("res_out", chk.res_out, ctx.tol("factorization"));
    let n = 64.min(phi.len().saturating_sub(4));
    let lo = phi.offset + (phi.len() as i64 - n as i64) / 2;
    rep.at_most("factor_swap", factor_swap_gap(&phi, lo, n)?, ctx.tol("factor_swap"));
    let pos_lo = jt.first().max(-(n as i64) / 2);
    rep.at_least("positivity", positivity_margin(&jt, rho, pos_lo, n)?, -ctx.tol("positivity"));
    let (slo, shi) = darb_section_spectrum(&chk.darb, n)?;
    rep.value("darb_spectrum", [slo, shi]);

    let mut rng = ctx.rng()?;
    let sweep = lipschitz_sweep(&mut rng, &dc.sweep, dc.pairs, dc.h)?;
    rep.at_most("lipschitz_cv", sweep.coefficient_of_variation, ctx.tol("lipschitz_cv"));
    let worst = sweep
        .rhos
        .iter()
        .zip(&sweep.max_ratio)
        .map(|(r, m)| m / (2.0 * r * sweep.c_hat / (r - 2.0)))
        .fold(0.0, f64::max);
    rep.at_most("lipschitz_bound", worst, 1.0 + 1e-12);
    rep.value("c_hat", sweep.c_hat);
    write_json(
        &ctx.path("darboux_report.json"),
        &json!({ "rho_quad": rho, "res_in": chk.res_in, "res_out": chk.res_out, "sweep": sweep, "darb": chk.darb }),
    )?;
    write_trace(ctx, &json!({ "steps": 1, "final": j }))?;
    Ok(rep)
}

/// Six significant digits, shortest rendering.
pub fn short(x: f64) -> String {
    format!("{:.5e}", x).parse::<f64>().map(|v| v.to_string()).unwrap_or_default()
}

fn native(spec: &PolySpec) -> Result<HyperbolicPoly, RunError> {
    Ok(match spec {
        PolySpec::Chebyshev { n, eps } => HyperbolicPoly::scaled_chebyshev(*n, *eps)?,
        PolySpec::Coeffs { c } => HyperbolicPoly::from_coeffs(c.clone())?,
        other => other.build()?,
    })
}

/// Hypothesis summary; judged checks are not run.
pub fn diagnose(ctx: &Ctx) -> Result<String, RunError> {
    const A: f64 = 10.0;
    let own = native(&ctx.cfg.poly)?;
    let t = ctx.cfg.poly.build()?;
    let gap = t.hyperbolicity_gap();
    let suff = t.is_sufficiently_hyperbolic(A);
    let kappa = t.kappa_bound();
    let mut s = String::new();
    let cv: Vec<String> = own.critical_values().iter().map(|v| short(*v)).collect();
    s += &format!("degree {}, invariant interval [{}, {}]\n", t.degree(), short(-own.xi()), short(own.xi()));
    s += &format!("critical values {}\n", cv.join(", "));
    s += "expanding: yes\n";
    if suff {
        s += &format!("gap {}, sufficiently hyperbolic at A={}: yes, ϰ ≤ {}\n", short(gap), A, short(kappa));
    } else {
        s += &format!(
            "gap {}, sufficiently hyperbolic at A={}: no, contraction not guaranteed, measurement mode\n",
            short(gap),
            A
        );
    }
    s += &format!("glue factor ≤ {}\n", short(t.glue_kappa_bound()));
    let ladder: Vec<String> = (1..=5).map(|l| short(kappa.powi(l))).collect();
    s += &format!("predicted κ-ladder (l = 1..5): {}\n", ladder.join(", "));
    let half = ctx.cfg.half_window();
    let w = -half..=half;
    let (lo, hi) = required_seed_window(&w, t.degree(), jacobi_renorm::jacobi::DEFAULT_TRUNCATE_DEPTH);
    let budget = if lo >= -half && hi <= half { "ok" } else { "too small" };
    s += &format!("window budget: {}..={} needs seed sites {lo}..={hi} ({budget})\n", -half, half);
    s += &format!("contraction theorem hypotheses met: {}\n", if suff { "yes" } else { "no" });
    Ok(s)
}
