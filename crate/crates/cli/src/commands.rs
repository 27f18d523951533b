use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pharmonic::asymptotics::{self, plateau_values, theoretical_d};
use pharmonic::certify::{self, AsymptoticConstants};
use pharmonic::geometry::validate_parameters;
use pharmonic::operators::{hessian_convexity_check, log_grid};
use pharmonic::profile_ode::{self, monotone_quantity, SolveError};
use pharmonic::{Certificate, ConvexProfile, ModelParameters, ProfileSolution, SolutionDump};
use rayon::prelude::*;

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::output::{self, numeric_rows, Cell, OutDir, DIAGNOSTICS_HEADER};

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub format: Format,
    pub quiet: bool,
}

impl Context {
    fn say(&self, text: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", text.as_ref());
        }
    }

    fn out_dir(&self) -> Result<OutDir, CliError> {
        OutDir::create(&self.out)
    }
}

fn describe(q: &ModelParameters) -> String {
    format!("n = {}, p = {}, delta = {}, sigma = {}, alpha = {}", q.n, q.p, q.delta, q.sigma, q.alpha)
}

pub fn validate(ctx: &Context) -> Result<(), CliError> {
    let report = validate_parameters(&ctx.config.model);
    let out = ctx.out_dir()?;
    out.write_json("validation.json", &report)?;

    let mut text = format!("parameters: {}\n", describe(&report.parameters));
    for c in &report.checks {
        let _ = writeln!(text, "  [{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.label, c.detail);
    }
    let _ = writeln!(text, "epsilon bound: {}", report.epsilon_bound);
    let _ = write!(
        text,
        "exponents: f' {}, A1 {}, A2 {}, A3 {}",
        report.decay_exponent, report.a1_exponent, report.a2_exponent, report.a3_exponent
    );
    ctx.say(text);

    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::Validation(report.failure_messages().join("; ")))
    }
}

fn solve_config(ctx: &Context) -> Result<ProfileSolution, SolveOutcome> {
    let cfg = &ctx.config;
    let (g, j) = cfg.warps_for(&cfg.model).map_err(|e| SolveOutcome::Fatal(CliError::Validation(e.to_string())))?;
    profile_ode::integrate(&cfg.model, &g, &j, &cfg.solver).map_err(|e| match e {
        SolveError::Config(m) => SolveOutcome::Fatal(CliError::Config(m)),
        SolveError::Inadmissible(m) => SolveOutcome::Fatal(CliError::Validation(m.join("; "))),
        other => SolveOutcome::Partial(other.to_string(), other.partial().cloned().map(Box::new)),
    })
}

enum SolveOutcome {
    Fatal(CliError),
    Partial(String, Option<Box<ProfileSolution>>),
}

fn load_solution(path: &Path) -> Result<ProfileSolution, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let dump: SolutionDump =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    ProfileSolution::from_dump(dump).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// The solution from `--solution`, or a fresh solve of the configured model.
fn obtain(ctx: &Context, solution: Option<&Path>) -> Result<ProfileSolution, CliError> {
    match solution {
        Some(path) => load_solution(path),
        None => solve_config(ctx).map_err(|o| match o {
            SolveOutcome::Fatal(e) => e,
            SolveOutcome::Partial(m, _) => CliError::Solver(m),
        }),
    }
}

fn write_solution(ctx: &Context, out: &OutDir, sol: &ProfileSolution, stem: &str) -> Result<(), CliError> {
    let dump = sol.to_dump().expect("configured warps are built-in");
    out.write_json(&format!("{stem}.json"), &dump)?;
    let rows = output::diagnostics(sol, &ctx.config.profile.build())?;
    out.write_table(&format!("diagnostics{}", &stem["solution".len()..]), ctx.format, &DIAGNOSTICS_HEADER, &numeric_rows(&rows))?;
    Ok(())
}

pub fn solve(ctx: &Context) -> Result<(), CliError> {
    let out = ctx.out_dir()?;
    out.write_text("config.toml", &ctx.config.to_toml())?;
    let sol = match solve_config(ctx) {
        Ok(sol) => sol,
        Err(SolveOutcome::Fatal(e)) => return Err(e),
        Err(SolveOutcome::Partial(msg, partial)) => {
            if let Some(p) = partial.filter(|p| !p.is_empty()) {
                write_solution(ctx, &out, &p, "solution.partial")?;
                ctx.say(format!("partial solution up to s = {} written to {}", p.s_max(), out.path("").display()));
            }
            return Err(CliError::Solver(msg));
        }
    };
    write_solution(ctx, &out, &sol, "solution")?;

    let q = monotone_quantity(&sol);
    let monotone = q.windows(2).all(|w| w[1] >= w[0] - 1e-8 * (1.0 + w[0].abs()));
    let mut text = format!(
        "solved {} on [{}, {}]: {} nodes, {} accepted / {} rejected steps\n",
        describe(&sol.params),
        sol.s_min(),
        sol.s_max(),
        sol.len(),
        sol.stats.accepted,
        sol.stats.rejected
    );
    let _ = writeln!(text, "c_hat estimate f(s_max) = {}", sol.f[sol.len() - 1]);
    let _ = writeln!(text, "max residual = {:e}", sol.stats.max_residual);
    let _ = write!(text, "Q non-decreasing: {}", if monotone { "yes" } else { "NO" });
    ctx.say(text);
    Ok(())
}

pub fn asymptotics(ctx: &Context, solution: Option<&Path>) -> Result<(), CliError> {
    let sol = obtain(ctx, solution)?;
    let window = ctx.config.fit_window(sol.s_max());
    let report = asymptotics::analyze(&sol, window, ctx.config.asymptotics.c1)
        .map_err(|e| CliError::Analysis(format!("asymptotics: {e}")))?;
    let out = ctx.out_dir()?;
    out.write_json("asymptotics.json", &report)?;

    let mut text = format!(
        "c_hat = {} (+/- {:e}), P = {} (+/- {:e}), limits converged: {}\n",
        report.c_hat, report.c_hat_uncertainty, report.p_limit, report.p_uncertainty, report.limits_converged
    );
    let _ = writeln!(
        text,
        "f' ~ D s^e on [{}, {}] ({} nodes): e = {} (theory {}, {:.2}% off), prefactor {} (D = {}, {:.2}% off)",
        window.lo,
        window.hi,
        report.fit_points,
        report.exponent_fitted,
        report.exponent_theory,
        100.0 * report.exponent_rel_deviation,
        report.prefactor_fitted,
        report.d_theory,
        100.0 * report.prefactor_rel_deviation
    );
    let _ = write!(text, "energy ratio: max deviation {:e}", report.energy_ratio.max_deviation);
    ctx.say(text);
    Ok(())
}

fn certified_profile(mut h: ConvexProfile, sol: &ProfileSolution) -> Result<ConvexProfile, CliError> {
    let t_max = sol.f.iter().copied().fold(0.0, f64::max).max(1.0);
    let grid = log_grid(1e-8, t_max, 32);
    let report = hessian_convexity_check(&mut h, sol.target_warp(), &grid);
    if h.is_certified() {
        Ok(h)
    } else {
        Err(CliError::Validation(format!(
            "profile {} is not convex and increasing on [1e-8, {t_max}] ({} violations)",
            h.name(),
            report.violations.len()
        )))
    }
}

fn scan(ctx: &Context, sol: &ProfileSolution, h: &ConvexProfile) -> Result<Certificate, CliError> {
    let sc = &ctx.config.scan;
    let s_hi = sc.s_hi.unwrap_or(sol.s_max());
    certify::scan_sign(sol, h, sc.s_lo, s_hi, sc.samples_per_decade).map_err(|e| CliError::Analysis(format!("certify: {e}")))
}

pub fn certify(ctx: &Context, solution: Option<&Path>) -> Result<(), CliError> {
    let sol = obtain(ctx, solution)?;
    let h = certified_profile(ctx.config.profile.build(), &sol)?;
    let cert = scan(ctx, &sol, &h)?;
    let out = ctx.out_dir()?;
    out.write_json("certificate.json", &cert)?;
    let header = ["s", "f", "fp", "fpp", "DeltapHF", "KKtildeSum", "K", "Ktilde", "A1", "A2", "A3", "margin"];
    let rows: Vec<Vec<Cell>> = cert
        .points
        .iter()
        .map(|pt| {
            let (st, d) = (pt.state, pt.terms);
            [st.s, st.f, st.f1, st.f2, pt.direct, d.product, d.k, d.ktilde, d.a1, d.a2, d.a3, pt.margin]
                .into_iter()
                .map(Cell::Num)
                .collect()
        })
        .collect();
    out.write_table("certified", ctx.format, &header, &rows)?;

    let window = ctx.config.fit_window(sol.s_max());
    let constants = plateau_values(&sol).ok().and_then(|lim| {
        let c1 = ctx.config.asymptotics.c1.unwrap_or(1.0);
        let d = theoretical_d(lim.p_limit, lim.c_hat, &sol.params, c1, sol.target_warp()).ok()?;
        Some(AsymptoticConstants { c_hat: lim.c_hat, d, c1 })
    });
    let terms = certify::analyze_terms(&sol, &h, window, constants).ok();
    if let Some(terms) = &terms {
        out.write_json("terms.json", terms)?;
    }

    let mut text = format!(
        "profile {}: {} certified radii in [{}, {}] ({} grid + {} refinement points)\n",
        cert.profile,
        cert.points.len(),
        cert.s_lo,
        cert.s_hi,
        cert.grid_points,
        cert.refinement_points
    );
    match (cert.first_negative_radius, cert.most_negative) {
        (Some(first), Some((s, v))) => {
            let _ = writeln!(text, "first certified radius {first}, most negative {v:e} at s = {s}");
        }
        _ => text.push_str("no certified negative values\n"),
    }
    let _ = write!(text, "negative fraction {:.4}, {} sign changes", cert.negative_fraction, cert.sign_changes.len());
    if let Some(t) = terms {
        let _ = write!(text, "\n|A2| dominates at s = {}: {}", t.window.hi, t.a2_dominates);
    }
    ctx.say(text);
    Ok(())
}

struct SweepRow {
    params: ModelParameters,
    feasible: bool,
    failed: Vec<String>,
    status: String,
    c_hat: Option<f64>,
    first_radius: Option<f64>,
    certified: Option<u64>,
    negative_fraction: Option<f64>,
    exponent: Option<f64>,
}

fn sweep_point(ctx: &Context, params: ModelParameters) -> SweepRow {
    let report = validate_parameters(&params);
    let mut row = SweepRow {
        params,
        feasible: report.all_passed(),
        failed: report.failures().map(|c| c.label.clone()).collect(),
        status: String::new(),
        c_hat: None,
        first_radius: None,
        certified: None,
        negative_fraction: None,
        exponent: None,
    };
    if !row.feasible && !ctx.config.solver.allow_inadmissible {
        row.status = "infeasible".into();
        return row;
    }
    let sub = Context {
        config: RunConfig { model: params, ..ctx.config.clone() },
        out: ctx.out.clone(),
        format: ctx.format,
        quiet: true,
    };
    let outcome = (|| -> Result<(), CliError> {
        let sol = obtain(&sub, None)?;
        row.c_hat = Some(sol.f[sol.len() - 1]);
        row.exponent = asymptotics::fit_decay_exponent(&sol, sub.config.fit_window(sol.s_max())).ok().map(|f| f.slope);
        let h = certified_profile(sub.config.profile.build(), &sol)?;
        let cert = scan(&sub, &sol, &h)?;
        row.first_radius = cert.first_negative_radius;
        row.certified = Some(cert.points.len() as u64);
        row.negative_fraction = Some(cert.negative_fraction);
        Ok(())
    })();
    row.status = match outcome {
        Ok(()) => "ok".into(),
        Err(e) => e.to_string(),
    };
    row
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    let points = ctx.config.sweep_points();
    let rows: Vec<SweepRow> = points.into_par_iter().map(|q| sweep_point(ctx, q)).collect();
    let header = [
        "n",
        "p",
        "delta",
        "sigma",
        "alpha",
        "feasible",
        "failed_hypotheses",
        "status",
        "c_hat",
        "exponent_theory",
        "exponent_fitted",
        "certified_points",
        "first_certified_radius",
        "negative_fraction",
    ];
    let cells: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            let q = &r.params;
            vec![
                Cell::Int(q.n.into()),
                Cell::Num(q.p),
                Cell::Num(q.delta),
                Cell::Num(q.sigma),
                Cell::Num(q.alpha),
                Cell::Bool(r.feasible),
                Cell::Text(r.failed.join("; ")),
                Cell::Text(r.status.clone()),
                Cell::opt(r.c_hat),
                Cell::Num(q.decay_exponent()),
                Cell::opt(r.exponent),
                r.certified.map_or(Cell::Missing, Cell::Int),
                Cell::opt(r.first_radius),
                Cell::opt(r.negative_fraction),
            ]
        })
        .collect();
    let out = ctx.out_dir()?;
    let path = out.write_table("sweep", ctx.format, &header, &cells)?;

    let feasible = rows.iter().filter(|r| r.feasible).count();
    let certified = rows.iter().filter(|r| r.first_radius.is_some()).count();
    ctx.say(format!(
        "swept {} points: {feasible} feasible, {certified} with certified radii; summary in {}",
        rows.len(),
        path.display()
    ));
    Ok(())
}

pub fn plot_data(ctx: &Context, solution: Option<&Path>, x: &str, ys: &[String]) -> Result<String, CliError> {
    let column = |name: &str| {
        DIAGNOSTICS_HEADER.iter().position(|c| *c == name).ok_or_else(|| {
            CliError::Config(format!("unknown column {name:?}; expected one of {}", DIAGNOSTICS_HEADER.join(",")))
        })
    };
    let xi = column(x)?;
    let yis = ys.iter().map(|y| column(y)).collect::<Result<Vec<_>, _>>()?;
    let sol = obtain(ctx, solution)?;
    let rows = output::diagnostics(&sol, &ctx.config.profile.build())?;

    Ok(match ctx.format {
        Format::Csv => {
            let blocks: Vec<String> = yis
                .iter()
                .map(|&yi| {
                    let mut block = format!("{},{}\n", DIAGNOSTICS_HEADER[xi], DIAGNOSTICS_HEADER[yi]);
                    for r in &rows {
                        let _ = writeln!(block, "{},{}", output::fmt_f64(r[xi]), output::fmt_f64(r[yi]));
                    }
                    block
                })
                .collect();
            blocks.join("\n\n")
        }
        Format::Json => {
            let series: Vec<serde_json::Value> = yis
                .iter()
                .map(|&yi| {
                    let pts: Vec<[f64; 2]> = rows.iter().map(|r| [r[xi], r[yi]]).collect();
                    serde_json::json!({ "x": DIAGNOSTICS_HEADER[xi], "y": DIAGNOSTICS_HEADER[yi], "points": pts })
                })
                .collect();
            let mut text = serde_json::to_string(&series).expect("finite values serialize");
            text.push('\n');
            text
        }
    })
}
