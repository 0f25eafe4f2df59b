use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ctred::certify::{
    check_cor1, check_cor2, check_lemma3, check_thm1, check_thm2_bound, check_thm3, closed_loop_poles, lqg_cost,
    ReductionCertificate,
};
use ctred::decompose::split_stable_unstable;
use ctred::experiments::{gen_instance, repro_scaling, repro_spread, repro_table1, repro_unstable, ExperimentReport};
use ctred::io::{load_system, save_system};
use ctred::lti::{four_block, is_internally_stable, StateSpace};
use ctred::norms::{h2_norm, h2_norm_squared, hinf_norm, l2_norm, linf_norm};
use ctred::reduce::{
    balanced_truncate_unstable, hankel_singular_values, modal_truncate, modal_truncate_stable, TruncationResult,
};
use ctred::{Error, Result};

#[derive(Parser)]
#[command(name = "ctred", version, about = "Order reduction of LQG controllers with stability and cost certificates")]
struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a controller by balanced or modal truncation.
    Reduce(ReduceArgs),
    /// LQG cost of a plant/controller pair and its four block contributions.
    Cost(PairArgs),
    /// System norm of a single system file.
    Norms(NormsArgs),
    /// Random plant/controller pair with a prescribed number of unstable controller modes.
    Gen(GenArgs),
    /// Re-run one of the built-in experiments.
    Repro(ReproArgs),
    /// Evaluate a certificate for a given reduced controller.
    Certify(CertifyArgs),
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    plant: PathBuf,
    #[arg(long)]
    controller: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Balanced,
    Modal,
}

#[derive(Args)]
struct ReduceArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Target order of the reduced controller.
    #[arg(long, conflicts_with = "blocks", required_unless_present = "blocks")]
    order: Option<usize>,
    /// Number of modal blocks to remove (modal only).
    #[arg(long)]
    blocks: Option<usize>,
    /// Modal only: never remove antistable blocks.
    #[arg(long)]
    keep_unstable: bool,
    /// Reduced controller output file.
    #[arg(long)]
    out: PathBuf,
    /// Also evaluate the matching certificate.
    #[arg(long)]
    certify: bool,
    /// Report file for --certify; defaults to `<out>.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    H2,
    Hinf,
    L2,
    Linf,
}

#[derive(Args)]
struct NormsArgs {
    system: PathBuf,
    #[arg(long, value_enum)]
    which: NormArg,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    order: usize,
    #[arg(long, default_value_t = 0)]
    unstable: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for plant.json and controller.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Table1,
    Unstable,
    Scaling,
    Spread,
}

#[derive(Args)]
struct ReproArgs {
    #[arg(value_enum)]
    which: Experiment,
    /// Report output file; the report is printed when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV output for the scaling sweep; defaults to `<out>` with a `.csv` extension.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Seed for the spread experiment.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of spread trials.
    #[arg(long, default_value_t = 30)]
    trials: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum TheoremArg {
    Lemma3,
    Thm1,
    Thm2,
    Cor1,
    Cor2,
    Thm3,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long)]
    reduced: PathBuf,
    #[arg(long, value_enum)]
    theorem: TheoremArg,
    /// Truncated Hankel singular values for cor1; computed from the controller when omitted.
    #[arg(long, value_delimiter = ',')]
    sigma_tail: Option<Vec<f64>>,
    /// Report output file; the certificate is printed when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = validate_env() {
        return fail(&Error::Parse(msg));
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn validate_env() -> std::result::Result<(), String> {
    match std::env::var("CTRED_TOL_STAB") {
        Ok(v) => match v.trim().parse::<f64>() {
            Ok(x) if x.is_finite() && x > 0.0 => Ok(()),
            _ => Err(format!("CTRED_TOL_STAB must be a positive number, got {v:?}")),
        },
        Err(_) => Ok(()),
    }
}

fn fail(e: &Error) -> ExitCode {
    let body = json!({ "error": e.tag(), "message": e.to_string() });
    eprintln!("{body}");
    ExitCode::from(e.exit_code() as u8)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Reduce(a) => cmd_reduce(a, cli.json),
        Command::Cost(a) => cmd_cost(a, cli.json),
        Command::Norms(a) => cmd_norms(a, cli.json),
        Command::Gen(a) => cmd_gen(a, cli.json),
        Command::Repro(a) => cmd_repro(a, cli.json),
        Command::Certify(a) => cmd_certify(a, cli.json),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn to_json_pretty<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn load_pair(p: &PairArgs) -> Result<(StateSpace, StateSpace)> {
    let g = load_system(&p.plant)?;
    let k = load_system(&p.controller)?;
    if g.inputs() != k.outputs() || g.outputs() != k.inputs() {
        return Err(Error::Dimension(format!(
            "plant is {}x{} but controller is {}x{}",
            g.outputs(),
            g.inputs(),
            k.outputs(),
            k.inputs()
        )));
    }
    Ok((g, k))
}

fn require_stabilizing(g: &StateSpace, k: &StateSpace) -> Result<()> {
    let report = is_internally_stable(g, k)?;
    if report.stable {
        Ok(())
    } else {
        Err(Error::NotStabilizing { abscissa: report.abscissa })
    }
}

fn modal_reduce(k: &StateSpace, r_red: usize, keep_unstable: bool) -> Result<TruncationResult> {
    if keep_unstable {
        modal_truncate_stable(k, r_red)
    } else {
        modal_truncate(k, r_red)
    }
}

/// Smallest block count whose removal lands exactly on order `r`.
fn modal_to_order(k: &StateSpace, r: usize, keep_unstable: bool) -> Result<TruncationResult> {
    let n = k.order();
    if r >= n {
        return Err(Error::InvalidOrder(format!("target order {r} must be below controller order {n}")));
    }
    for r_red in 1..=n {
        let t = modal_reduce(k, r_red, keep_unstable)?;
        match t.reduced.order() {
            o if o == r => return Ok(t),
            o if o < r => {
                return Err(Error::InvalidOrder(format!(
                    "order {r} splits a complex modal pair; nearest reachable orders are {} and {o}",
                    o + 2
                )))
            }
            _ => {}
        }
    }
    Err(Error::InvalidOrder(format!("order {r} is not reachable by modal truncation")))
}

fn stable_part_tail(k: &StateSpace, reduced_order: usize) -> Result<Vec<f64>> {
    let split = split_stable_unstable(k)?;
    let kept = reduced_order.checked_sub(split.unstable.order()).ok_or_else(|| {
        Error::InvalidOrder("reduced controller is smaller than the antistable part".into())
    })?;
    let sigma = hankel_singular_values(&split.stable)?;
    Ok(sigma.get(kept..).map(<[f64]>::to_vec).unwrap_or_default())
}

fn cmd_reduce(a: &ReduceArgs, json_out: bool) -> Result<()> {
    let (g, k) = load_pair(&a.pair)?;
    require_stabilizing(&g, &k)?;
    let t = match (a.method, a.order, a.blocks) {
        (MethodArg::Balanced, Some(r), _) => balanced_truncate_unstable(&k, r)?,
        (MethodArg::Balanced, None, _) => {
            return Err(Error::InvalidOrder("balanced truncation takes --order".into()));
        }
        (MethodArg::Modal, Some(r), _) => modal_to_order(&k, r, a.keep_unstable)?,
        (MethodArg::Modal, None, Some(b)) => modal_reduce(&k, b, a.keep_unstable)?,
        (MethodArg::Modal, None, None) => unreachable!("clap requires --order or --blocks"),
    };
    save_system(&a.out, &t.reduced, Some("reduced controller"))?;

    let delta_hinf = hinf_norm(&t.delta).ok();
    let mut summary = json!({
        "method": t.method,
        "order": t.reduced.order(),
        "truncated_tail": t.truncated_tail,
        "delta_hinf": delta_hinf,
        "out": a.out.display().to_string(),
    });

    if a.certify {
        let cert = match t.method {
            ctred::reduce::Method::Balanced => check_cor1(&g, &k, &t.reduced, &t.truncated_tail)?,
            ctred::reduce::Method::Modal => match check_cor2(&g, &k, &t.reduced) {
                Err(Error::WrongCertificate) => check_thm3(&g, &k, &t.reduced)?,
                other => other?,
            },
        };
        let mut report = ExperimentReport::new("reduce", "controller reduction with certificate");
        report.costs.insert("j_k".into(), lqg_cost(&g, &k)?);
        report.costs.insert("j_kr".into(), lqg_cost(&g, &t.reduced).unwrap_or(f64::INFINITY));
        if let Some(d) = delta_hinf {
            report.norms.insert("delta_hinf".into(), d);
        }
        report.check("condition", cert.condition_satisfied, format!("{:?}", cert.theorem).to_lowercase());
        report.check("closed_loop_stable", cert.verified_stable, "direct eigenvalue check".into());
        report.closed_loop_poles = closed_loop_poles(&g, &t.reduced)?.iter().map(|p| [p.re, p.im]).collect();
        report.certificates.push(cert);
        let path = a.report.clone().unwrap_or_else(|| {
            let mut p = a.out.clone().into_os_string();
            p.push(".report.json");
            PathBuf::from(p)
        });
        write_file(&path, &to_json_pretty(&report))?;
        summary["report"] = json!(path.display().to_string());
        summary["certificate_passed"] = json!(report.all_passed());
    }

    if json_out {
        println!("{summary}");
    } else {
        println!("reduced order: {}", t.reduced.order());
        match delta_hinf {
            Some(d) => println!("||K_r - K||_Hinf: {d:.6e}"),
            None => println!("||K_r - K||_Hinf: unstable difference"),
        }
        if let Some(p) = summary.get("certificate_passed") {
            println!("certificate: {}", if p.as_bool() == Some(true) { "passed" } else { "failed" });
        }
        println!("wrote {}", a.out.display());
    }
    Ok(())
}

fn cmd_cost(a: &PairArgs, json_out: bool) -> Result<()> {
    let (g, k) = load_pair(a)?;
    let j = lqg_cost(&g, &k)?;
    let fb = four_block(&g, &k)?;
    let mut blocks = [[0.0; 2]; 2];
    for (i, row) in blocks.iter_mut().enumerate() {
        for (jj, v) in row.iter_mut().enumerate() {
            *v = h2_norm_squared(&fb.block(i, jj))?;
        }
    }
    if json_out {
        println!("{}", json!({ "cost": j, "blocks": blocks }));
    } else {
        println!("J = {j:.6}");
        for (i, row) in blocks.iter().enumerate() {
            for (jj, v) in row.iter().enumerate() {
                println!("  block ({},{}): {v:.6}", i + 1, jj + 1);
            }
        }
    }
    Ok(())
}

fn cmd_norms(a: &NormsArgs, json_out: bool) -> Result<()> {
    let s = load_system(&a.system)?;
    let (name, value) = match a.which {
        NormArg::H2 => ("h2", h2_norm(&s)?),
        NormArg::Hinf => ("hinf", hinf_norm(&s)?),
        NormArg::L2 => ("l2", l2_norm(&s)?),
        NormArg::Linf => ("linf", linf_norm(&s)?),
    };
    if json_out {
        println!("{}", json!({ "norm": name, "value": value }));
    } else {
        println!("{value:.10e}");
    }
    Ok(())
}

fn cmd_gen(a: &GenArgs, json_out: bool) -> Result<()> {
    let (g, k) = gen_instance(a.order, a.unstable, a.seed)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io(format!("{}: {e}", a.out.display())))?;
    let (gp, kp) = (a.out.join("plant.json"), a.out.join("controller.json"));
    save_system(&gp, &g, Some("plant"))?;
    save_system(&kp, &k, Some("controller"))?;
    if json_out {
        println!("{}", json!({ "plant": gp.display().to_string(), "controller": kp.display().to_string() }));
    } else {
        println!("wrote {} and {}", gp.display(), kp.display());
    }
    Ok(())
}

fn scaling_csv(points: &[ctred::experiments::ScalingPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(vec![]);
    for p in points {
        w.serialize(p).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn cmd_repro(a: &ReproArgs, json_out: bool) -> Result<()> {
    let mut csv_text = None;
    let report = match a.which {
        Experiment::Table1 => repro_table1()?,
        Experiment::Unstable => repro_unstable()?,
        Experiment::Scaling => {
            let (report, points) = repro_scaling()?;
            csv_text = Some(scaling_csv(&points)?);
            report
        }
        Experiment::Spread => repro_spread(a.seed, a.trials)?.0,
    };
    let text = to_json_pretty(&report);
    let csv_path = a.csv.clone().or_else(|| a.out.as_ref().map(|p| p.with_extension("csv")));
    if let (Some(csv), Some(path)) = (&csv_text, &csv_path) {
        write_file(path, csv)?;
    }
    match &a.out {
        Some(path) => {
            write_file(path, &text)?;
            if json_out {
                println!("{}", json!({ "report": path.display().to_string(), "all_passed": report.all_passed() }));
            } else {
                print_checks(&report);
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Error::Io(e.to_string()))?;
            if csv_path.is_none() {
                if let Some(csv) = &csv_text {
                    out.write_all(csv.as_bytes()).map_err(|e| Error::Io(e.to_string()))?;
                }
            }
        }
    }
    Ok(())
}

fn print_checks(report: &ExperimentReport) {
    for c in &report.checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

fn cmd_certify(a: &CertifyArgs, json_out: bool) -> Result<()> {
    let (g, k) = load_pair(&a.pair)?;
    let k_r = load_system(&a.reduced)?;
    require_stabilizing(&g, &k)?;
    let cert: ReductionCertificate = match a.theorem {
        TheoremArg::Lemma3 => check_lemma3(&g, &k, &k_r)?,
        TheoremArg::Thm1 => check_thm1(&g, &k, &k_r)?,
        TheoremArg::Thm2 => check_thm2_bound(&g, &k, &k_r)?,
        TheoremArg::Cor1 => {
            let tail = match &a.sigma_tail {
                Some(t) => t.clone(),
                None => stable_part_tail(&k, k_r.order())?,
            };
            check_cor1(&g, &k, &k_r, &tail)?
        }
        TheoremArg::Cor2 => check_cor2(&g, &k, &k_r)?,
        TheoremArg::Thm3 => check_thm3(&g, &k, &k_r)?,
    };
    let text = to_json_pretty(&cert);
    match &a.out {
        Some(path) if !json_out => {
            write_file(path, &text)?;
            let v: Value = serde_json::from_str(&text).expect("round trip");
            println!("condition satisfied: {}", cert.condition_satisfied);
            println!("closed loop stable:  {}", cert.verified_stable);
            println!("cost bound:          {}", v["cost_bound"]);
            println!("wrote {}", path.display());
        }
        Some(path) => {
            write_file(path, &text)?;
            print!("{text}");
        }
        None => print!("{text}"),
    }
    Ok(())
}
