// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use drohs::driver::{bench_case, check_model, compare, run_case, BENCH_HEADER};
use drohs::io::{load_case, load_solution, save_solution, status_name, SolutionFile, TraceWriter};
use drohs::Threaded;
use drohs_core::engine::{EngineConfig, RunStatus, Start};
use drohs_core::tensor::ChannelLayout;

#[derive(Parser)]
#[command(name = "drohs", version, about = "Distributed AC optimal power flow on a star network")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a case and write the result and trace.
    Run(RunArgs),
    /// Check ranks, factor residuals and variable counts of the nodal model.
    CheckModel {
        #[arg(long)]
        case: PathBuf,
    },
    /// Compare a result with a reference solution.
    Compare {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Time runs over a set of cases and print CSV.
    Bench {
        #[arg(long)]
        cases: String,
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    case: PathBuf,
    /// cold, flat or warm:PATH (a result or reference JSON).
    #[arg(long, default_value = "flat")]
    start: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 0.75)]
    a: f64,
    #[arg(long, default_value_t = 20.0)]
    rho_power: f64,
    #[arg(long, default_value_t = 200.0)]
    rho_voltage: f64,
    #[arg(long, default_value_t = 0.3)]
    delta0: f64,
    #[arg(long, default_value_t = 1e-3)]
    tau0: f64,
    /// Proximal weight on flow and generation coordinates.
    #[arg(long, default_value_t = 1e-3)]
    kappa: f64,
    /// shared or split.
    #[arg(long, default_value = "shared")]
    layout: String,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Record per-node solve times in the trace (makes it nondeterministic).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_start(s: &str, nb: usize) -> Result<Start> {
    match s {
        "cold" => Ok(Start::Cold),
        "flat" => Ok(Start::Flat),
        _ => {
            let Some(p) = s.strip_prefix("warm:") else { bail!("--start must be cold, flat or warm:PATH, got '{s}'") };
            let sol = load_solution(Path::new(p))?;
            if sol.v_re.len() != nb {
                bail!("warm start has {} buses, case has {nb}", sol.v_re.len());
            }
            let mut v = sol.v_re.clone();
            v.extend(&sol.v_im);
            Ok(Start::Warm(v))
        }
    }
}

fn config_from(a: &RunArgs, nb: usize) -> Result<EngineConfig> {
    let layout = match a.layout.as_str() {
        "shared" => ChannelLayout::Shared,
        "split" => ChannelLayout::Split,
        o => bail!("--layout must be shared or split, got '{o}'"),
    };
    let cfg = EngineConfig {
        rho_power: a.rho_power,
        rho_voltage: a.rho_voltage,
        delta0: a.delta0,
        a: a.a,
        tau0: a.tau0,
        max_iter: a.max_iter,
        tol: a.tol,
        seed: a.seed,
        start: parse_start(&a.start, nb)?,
        kappa: a.kappa,
        layout,
        ..EngineConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(a: &RunArgs) -> Result<u8> {
    let case = load_case(&a.case)?;
    let cfg = config_from(a, case.nb())?;
    let exec = Threaded::new(a.workers, a.timing);
    let out = match &a.trace {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            let mut w = TraceWriter::new(BufWriter::new(f))?;
            run_case(&case, &cfg, &exec, Some(&mut w))?
        }
        None => run_case::<_, std::io::Sink>(&case, &cfg, &exec, None)?,
    };
    let r = &out.result;
    println!("status      {}", status_name(r.status));
    println!("iterations  {}", r.iterations);
    println!("objective   {:.6} $/h", r.objective);
    println!("residual    {:.3e} p.u.", out.feasibility.max());
    println!("tags        {}", r.tags.iter().map(|t| t.letter()).collect::<String>());
    if let Some(p) = &a.out {
        save_solution(p, &SolutionFile::from_run(&case, r))?;
    }
    Ok(if r.status == RunStatus::Converged { 0 } else { 2 })
}

fn cmd_check(path: &Path) -> Result<u8> {
    let case = load_case(path)?;
    let nodes = check_model(&case)?;
    println!("{:>6} {:>3} {:>3} {:>6} {:>6} {:>10} {:>10}  status", "bus", "nl", "ng", "|x|", "|mu|", "ranks", "residual");
    let mut ok = true;
    for n in &nodes {
        let ranks: String = n.quantities.iter().map(|q| char::from_digit(q.found.min(9) as u32, 10).unwrap()).collect();
        let res = n.quantities.iter().map(|q| q.residual).fold(0.0, |m: f64, r| if r.is_nan() { f64::NAN } else { m.max(r) });
        println!(
            "{:>6} {:>3} {:>3} {:>6} {:>6} {:>10} {:>10.2e}  {}",
            n.id,
            n.nl,
            n.ng,
            n.x_len,
            n.mu_len,
            ranks,
            res,
            if n.ok() { "ok" } else { "FAIL" }
        );
        for q in n.quantities.iter().filter(|q| q.found != q.expected) {
            println!("       {}: rank {} expected {}", q.what, q.found, q.expected);
        }
        ok &= n.ok();
    }
    let vars_max = nodes.iter().map(|n| n.mu_len).max().unwrap_or(0);
    println!("buses {}  n_var_max {}  {}", nodes.len(), vars_max, if ok { "all rank checks pass" } else { "rank checks FAILED" });
    Ok(if ok { 0 } else { 1 })
}

fn cmd_compare(result: &Path, reference: &Path) -> Result<u8> {
    let r = load_solution(result)?;
    let f = load_solution(reference)?;
    let c = compare(&r, &f)?;
    println!("distance        {:.3e}", c.voltage.distance);
    println!("rotation        {:.6} rad", c.voltage.rotation);
    println!("worst bus       {} ({:.3e})", r.bus_ids[c.voltage.worst_bus], c.voltage.worst_deviation);
    println!("objective gap   {:.3e}", c.objective_gap);
    Ok(if c.pass(1e-4) { 0 } else { 2 })
}

fn cmd_bench(pattern: &str, repeat: usize, workers: usize, max_iter: usize) -> Result<u8> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern).context("bad glob pattern")?.filter_map(|p| p.ok()).collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no case matches '{pattern}'");
    }
    let exec = Threaded::new(workers, true);
    let cfg = EngineConfig { max_iter, ..EngineConfig::default() };
    println!("{BENCH_HEADER}");
    for p in &paths {
        let case = load_case(p)?;
        let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or("?");
        let mut times = Vec::new();
        for _ in 0..repeat.max(1) {
            let row = bench_case(name, &case, &cfg, &exec)?;
            println!("{}", row.csv());
            times.push(row.max_node_ms);
        }
        if times.len() > 1 {
            let mean = times.iter().sum::<f64>() / times.len() as f64;
            let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (times.len() - 1) as f64;
            eprintln!("{name}: max_node_ms mean {mean:.3} sd {:.3} over {} runs", var.sqrt(), times.len());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("DROHS_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let r = match &cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::CheckModel { case } => cmd_check(case),
        Cmd::Compare { result, reference } => cmd_compare(result, reference),
        Cmd::Bench { cases, repeat, workers, max_iter } => cmd_bench(cases, *repeat, *workers, *max_iter),
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
