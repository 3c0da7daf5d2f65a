mod config;
mod svg;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches};
use ksk_core::bounds::{
    chord_integral, envelope, grube_comparator, m_beta, moment_integral, n_beta, n_beta_piecewise, BoundParams,
    EnvelopeParams, MomentValue,
};
use ksk_core::geometry::{min_gamma, PhasePoint};
use ksk_core::kernel::{density_derivative, DensityGrid, GridSpec, InversionOptions};
use ksk_core::simulate::{path_rng, sample_kinetic_path, write_samples_csv, KineticSampler, SimConfig};
use ksk_core::verify::{emit_report, run_check, write_summary_csv, CheckName, CheckSpec};
use ksk_core::Error;

use config::{parse_config_text, Command, RunConfig, UsageError, KEYS};

enum Failure {
    Usage(String),
    Checks(usize),
    Accuracy(String),
    Other(String),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Accuracy { .. } => Failure::Accuracy(e.to_string()),
            Error::Domain(_) | Error::Config(_) | Error::Unsupported(_) => Failure::Usage(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn cli() -> clap::Command {
    let mut cmd = clap::Command::new("ksk")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Heat kernels of kinetic stable-like operators: evaluation, simulation and bound checks")
        .arg(
            Arg::new("command")
                .required(true)
                .value_parser(Command::ALL.map(|c| c.as_str()))
                .help("what to run"),
        )
        .arg(Arg::new("config").long("config").value_name("FILE").help("key=value file; flags take precedence"))
        .arg(
            Arg::new("set")
                .long("set")
                .value_name("KEY=VALUE")
                .action(ArgAction::Append)
                .help("set any configuration key"),
        );
    for k in KEYS {
        cmd = cmd.arg(
            Arg::new(k.key)
                .long(k.flag)
                .value_name("VALUE")
                .allow_hyphen_values(true)
                .help(format!("{} [{}]", k.help, k.key)),
        );
    }
    cmd
}

fn config_from(m: &ArgMatches) -> Result<RunConfig, UsageError> {
    let command: Command = m.get_one::<String>("command").expect("required").parse()?;
    let file = match m.get_one::<String>("config") {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| UsageError(format!("cannot read {p}: {e}")))?;
            parse_config_text(&text)?
        }
        None => Vec::new(),
    };
    let mut flags = Vec::new();
    if let Some(sets) = m.get_many::<String>("set") {
        for s in sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| UsageError(format!("--set expects KEY=VALUE, got '{s}'")))?;
            flags.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    for k in KEYS {
        if let Some(v) = m.get_one::<String>(k.key) {
            flags.push((k.key.to_string(), v.clone()));
        }
    }
    RunConfig::build(command, &file, &flags)
}

fn set_threads(cfg: &RunConfig) -> Result<(), UsageError> {
    let n = match cfg.get_opt::<usize>("run.threads")? {
        Some(n) => Some(n),
        None => match std::env::var("KSK_THREADS") {
            Ok(s) => Some(
                s.parse()
                    .ok()
                    .filter(|n: &usize| *n > 0)
                    .ok_or_else(|| UsageError(format!("KSK_THREADS='{s}' is not a positive integer")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| UsageError(e.to_string()))?;
    }
    Ok(())
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let p = PathBuf::from(cfg.raw("run.out").unwrap_or("out"));
    fs::create_dir_all(&p)?;
    Ok(p)
}

fn write_file(path: &Path, body: &str) -> Outcome {
    fs::write(path, body)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn point(cfg: &RunConfig, key: &str) -> Result<PhasePoint<f64>, Failure> {
    let z: Vec<f64> = cfg.list(key)?;
    Ok(PhasePoint::from_flat(&z)?)
}

fn eval(cfg: &RunConfig) -> Outcome {
    let k = cfg.kernel()?;
    let z = point(cfg, "eval.z")?;
    let (jx, jv): (u32, u32) = (cfg.get("eval.jx")?, cfg.get("eval.jv")?);
    let p = density_derivative(&k, cfg.t(), &z, jx, jv, &InversionOptions::default())?;
    let e = EnvelopeParams::new(k.kappa_bounds().0, k.kappa_bounds().1, cfg.t(), cfg.alpha(), cfg.d())?;
    let env = envelope(&PhasePoint::origin(cfg.d()), &z, &e, jx, jv)?;
    print!("{}", cfg.header("# "));
    println!("t,z,jx,jv,value,envelope_shape");
    println!(
        "{},{},{jx},{jv},{p:.12e},{:.6e}",
        cfg.t(),
        z.to_flat().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "),
        env.upper_shape
    );
    Ok(())
}

fn grid_spec(cfg: &RunConfig) -> Result<GridSpec, Failure> {
    let nodes: Vec<usize> = cfg.list("grid.nodes")?;
    let extent: Vec<f64> = cfg.list("grid.extent")?;
    if nodes.len() != 2 * cfg.d() || extent.len() != 2 * cfg.d() {
        return Err(Failure::Usage(format!(
            "grid.nodes and grid.extent need {} entries for d={}",
            2 * cfg.d(),
            cfg.d()
        )));
    }
    Ok(GridSpec {
        half_extent: extent,
        nodes,
    })
}

fn compute_grid(cfg: &RunConfig) -> Result<DensityGrid, Failure> {
    let k = cfg.kernel()?;
    let tol: f64 = cfg.get("grid.tail_tol")?;
    let name = cfg.raw("kernel.kappa").unwrap_or("constant").to_string();
    Ok(DensityGrid::compute(&k, &name, cfg.t(), &grid_spec(cfg)?, tol)?)
}

fn grid(cfg: &RunConfig) -> Outcome {
    let g = compute_grid(cfg)?;
    let dir = out_dir(cfg)?;
    let stem = format!("grid_d{}_alpha{}_t{}", cfg.d(), cfg.alpha(), cfg.t());
    let fmt = cfg.raw("grid.format").unwrap_or("both");
    if fmt != "binary" {
        let mut buf = cfg.header("# ").into_bytes();
        writeln!(buf, "# mass={:e} ringing={:e}", g.mass, g.ringing())?;
        g.write_csv(&mut buf)?;
        let p = dir.join(format!("{stem}.csv"));
        fs::write(&p, buf)?;
        println!("wrote {}", p.display());
    }
    if fmt != "csv" {
        // the binary layout has no comment field; its header goes to a sidecar
        let p = dir.join(format!("{stem}.bin"));
        let mut f = fs::File::create(&p)?;
        g.write_binary(&mut f)?;
        write_file(&dir.join(format!("{stem}.bin.txt")), &cfg.header("# "))?;
        println!("wrote {}", p.display());
    }
    println!("mass {:.6} over {} nodes", g.mass, g.len());
    Ok(())
}

fn sim_config(cfg: &RunConfig) -> Result<SimConfig, Failure> {
    let sc = SimConfig {
        seed: cfg.seed(),
        n_paths: cfg.get("simulate.paths")?,
        t: cfg.t(),
        epsilon: cfg.get("simulate.epsilon")?,
        scheme: cfg.scheme()?,
    };
    sc.validate()?;
    Ok(sc)
}

const PATH_STEPS: usize = 1000;

/// Jump-part trajectories on a uniform mesh, one CSV and one SVG.
fn trajectories(cfg: &RunConfig, dir: &Path, stem: &str) -> Outcome {
    let k = cfg.kernel()?;
    let sc = sim_config(cfg)?;
    let d = cfg.d();
    let times: Vec<f64> = (0..=PATH_STEPS).map(|i| sc.t * i as f64 / PATH_STEPS as f64).collect();
    let mut csv = cfg.header("# ");
    csv.push_str("# rows: jumps above epsilon; the last row of each path adds the small-jump part\n");
    let names: Vec<String> = (1..=d).map(|i| format!("x{i}")).chain((1..=d).map(|i| format!("v{i}"))).collect();
    csv.push_str(&format!("path_id,s,{}\n", names.join(",")));
    let mut xs_series = Vec::new();
    let mut vs_series = Vec::new();
    for id in 0..sc.n_paths {
        let mut rng = path_rng(sc.seed, id as u64);
        let path = sample_kinetic_path(&k, &sc, &mut rng)?;
        let (mut xs, mut vs) = (Vec::new(), Vec::new());
        for &s in &times {
            let v = path.jump_part_at(s);
            let mut x = vec![0.0; d];
            for (tau, y) in path.jump_times.iter().zip(&path.jump_sizes) {
                if *tau > s {
                    break;
                }
                for (a, b) in x.iter_mut().zip(y) {
                    *a += b * (s - tau);
                }
            }
            let row: Vec<String> = x.iter().chain(&v).map(|c| format!("{c:e}")).collect();
            csv.push_str(&format!("{id},{s},{}\n", row.join(",")));
            xs.push(x[0]);
            vs.push(v[0]);
        }
        let end: Vec<String> = path.x.iter().chain(&path.v).map(|c| format!("{c:e}")).collect();
        csv.push_str(&format!("{id},{},{}\n", sc.t, end.join(",")));
        xs_series.push(xs);
        vs_series.push(vs);
    }
    write_file(&dir.join(format!("{stem}.csv")), &csv)?;
    let title = format!("kinetic stable path, alpha={}, kappa={}", cfg.alpha(), cfg.raw("kernel.kappa").unwrap_or(""));
    let svg = svg::line_panels(&cfg.header(""), &title, &times, &[("V", vs_series), ("X", xs_series)]);
    write_file(&dir.join(format!("{stem}.svg")), &svg)
}

const MAX_PLOTTED_PATHS: usize = 20;

fn simulate(cfg: &RunConfig) -> Outcome {
    let dir = out_dir(cfg)?;
    let sc = sim_config(cfg)?;
    let stem = format!("simulate_alpha{}_seed{}", cfg.alpha(), sc.seed);
    if sc.n_paths <= MAX_PLOTTED_PATHS {
        return trajectories(cfg, &dir, &stem);
    }
    let k = cfg.kernel()?;
    let pts = KineticSampler::new(&k, &sc)?.endpoints(sc.n_paths);
    let mut buf = cfg.header("# ").into_bytes();
    write_samples_csv(&mut buf, &sc, cfg.d(), &pts)?;
    let p = dir.join(format!("{stem}_endpoints.csv"));
    fs::write(&p, buf)?;
    println!("wrote {}", p.display());
    Ok(())
}

fn bounds(cfg: &RunConfig) -> Outcome {
    let z = point(cfg, "bounds.z")?;
    let (d, alpha) = (cfg.d(), cfg.alpha());
    let beta = cfg.get_opt::<f64>("bounds.beta")?.unwrap_or(d as f64 + alpha);
    let q: f64 = cfg.get("bounds.q")?;
    let p = BoundParams::new(beta, d)?;
    let k = cfg.kernel()?;
    let e = EnvelopeParams::new(k.kappa_bounds().0, k.kappa_bounds().1, cfg.t(), alpha, d)?;
    let env = envelope(&PhasePoint::origin(d), &z, &e, 0, 0)?;
    let moment = match moment_integral(z.v(), q, &p)? {
        MomentValue::Finite(m) => format!("{m:.10e}"),
        MomentValue::Divergent => "divergent".into(),
    };
    let chord = min_gamma(&z);
    print!("{}", cfg.header("# "));
    println!("quantity,value");
    println!("beta,{beta}");
    println!("n_beta,{:.12e}", n_beta(&z, &p));
    println!("n_beta_piecewise,{:.12e}", n_beta_piecewise(&z, &p));
    println!("m_beta,{:.12e}", m_beta(&z, &p));
    println!("chord_min,{:.12e}", chord.value);
    println!("chord_argmin,{}", chord.s_star);
    println!("chord_integral,{:.12e}", chord_integral(&z, &p)?);
    println!("moment_q{q},{moment}");
    println!("grube_comparator,{:.12e}", grube_comparator(&z, alpha)?);
    println!("envelope_lower,{:.12e}", env.lower.unwrap_or(f64::NAN));
    println!("envelope_upper_shape,{:.12e}", env.upper_shape);
    Ok(())
}

fn verify(cfg: &RunConfig) -> Outcome {
    let suite = cfg.raw("verify.suite").unwrap_or("all");
    let names: Vec<CheckName> = if suite == "all" {
        CheckName::ALL.to_vec()
    } else {
        suite
            .split(',')
            .map(|s| s.trim().parse().map_err(|e: Error| Failure::Usage(e.to_string())))
            .collect::<Result<_, _>>()?
    };
    let quick: bool = cfg.get("verify.quick")?;
    let mut reports = Vec::new();
    for name in names {
        let mut spec = if quick { CheckSpec::quick(name) } else { CheckSpec::default_for(name) };
        spec.seed = cfg.seed();
        let r = run_check(&spec);
        println!("{}", r.summary());
        reports.push(r);
    }
    let dir = out_dir(cfg)?;
    for p in emit_report(&reports, &dir)? {
        println!("wrote {}", p.display());
    }
    // summary again with the config header in front
    let mut buf = cfg.header("# ").into_bytes();
    write_summary_csv(&mut buf, &reports)?;
    let p = dir.join(format!("verify_seed{}.csv", cfg.seed()));
    fs::write(&p, buf)?;
    println!("wrote {}", p.display());
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(Failure::Checks(failed));
    }
    Ok(())
}

/// `log₁₀ p_t`, `log₁₀` of the envelope shape and their difference on the window.
fn envelope_figure(cfg: &RunConfig) -> Outcome {
    if cfg.d() != 1 {
        return Err(Failure::Usage("the envelope figure is drawn for d=1".into()));
    }
    let g = compute_grid(cfg)?;
    let window: Vec<f64> = cfg.list("figure.window")?;
    if window.len() != 2 {
        return Err(Failure::Usage("figure.window needs |x|,|v|".into()));
    }
    let k = cfg.kernel()?;
    let e = EnvelopeParams::new(k.kappa_bounds().0, k.kappa_bounds().1, cfg.t(), cfg.alpha(), 1)?;
    let floor = g.max_value() * 1e-12;
    let pick = |axis: usize, half: f64| -> Vec<usize> {
        let a = &g.axes[axis];
        (0..a.n).filter(|&j| a.node(j).abs() <= half).collect()
    };
    let (ix, iv) = (pick(0, window[0]), pick(1, window[1]));
    // at most ~120 cells per axis in the picture
    let thin = |v: Vec<usize>| -> Vec<usize> {
        let step = v.len().div_ceil(120).max(1);
        v.into_iter().step_by(step).collect()
    };
    let (ix, iv) = (thin(ix), thin(iv));
    if ix.is_empty() || iv.is_empty() {
        return Err(Failure::Usage("figure window contains no grid nodes".into()));
    }
    let xs: Vec<f64> = ix.iter().map(|&j| g.axes[0].node(j)).collect();
    let vs: Vec<f64> = iv.iter().map(|&j| g.axes[1].node(j)).collect();
    let mut lp = Vec::new();
    let mut ln = Vec::new();
    let mut csv = cfg.header("# ");
    csv.push_str(&format!("# density floor {floor:e} (values below are clamped)\nx,v,density,envelope_shape,log10_ratio\n"));
    let o = PhasePoint::origin(1);
    for (&jx, &x) in ix.iter().zip(&xs) {
        for (&jv, &v) in iv.iter().zip(&vs) {
            let p = g.values[g.flat_of(&[jx, jv])].max(floor);
            let shape = envelope(&o, &PhasePoint::scalar(x, v), &e, 0, 0)?.upper_shape;
            let (a, b) = (p.log10(), shape.log10());
            csv.push_str(&format!("{x},{v},{p:e},{shape:e},{:.6}\n", a - b));
            lp.push(a);
            ln.push(b);
        }
    }
    let ratio: Vec<f64> = lp.iter().zip(&ln).map(|(a, b)| a - b).collect();
    let dir = out_dir(cfg)?;
    let stem = format!("figure_envelope_alpha{}_t{}", cfg.alpha(), cfg.t());
    let head = cfg.header("");
    write_file(&dir.join(format!("{stem}.csv")), &csv)?;
    write_file(
        &dir.join(format!("{stem}_density.svg")),
        &svg::heatmap(&head, &format!("log10 p_t, alpha={}, t={}", cfg.alpha(), cfg.t()), &xs, &vs, &lp),
    )?;
    write_file(
        &dir.join(format!("{stem}_shape.svg")),
        &svg::heatmap(&head, "log10 envelope shape", &xs, &vs, &ln),
    )?;
    write_file(
        &dir.join(format!("{stem}_log_ratio.svg")),
        &svg::heatmap(&head, "log10 (density / envelope shape)", &xs, &vs, &ratio),
    )
}

fn figure(cfg: &RunConfig) -> Outcome {
    match cfg.raw("figure.kind") {
        Some("path") => {
            let dir = out_dir(cfg)?;
            let n: usize = cfg.get("simulate.paths")?;
            if n > MAX_PLOTTED_PATHS {
                return Err(Failure::Usage(format!("path figures take at most {MAX_PLOTTED_PATHS} paths")));
            }
            trajectories(cfg, &dir, &format!("figure_path_alpha{}_seed{}", cfg.alpha(), cfg.seed()))
        }
        _ => envelope_figure(cfg),
    }
}

fn run(cfg: &RunConfig) -> Outcome {
    set_threads(cfg)?;
    match cfg.command {
        Command::Eval => eval(cfg),
        Command::Grid => grid(cfg),
        Command::Simulate => simulate(cfg),
        Command::Bounds => bounds(cfg),
        Command::Verify => verify(cfg),
        Command::Figure => figure(cfg),
    }
}

fn main() -> ExitCode {
    let m = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = config_from(&m).map_err(Failure::from).and_then(|cfg| run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("ksk: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Checks(n)) => {
            eprintln!("ksk: {n} check(s) failed");
            ExitCode::from(1)
        }
        Err(Failure::Accuracy(msg)) => {
            eprintln!("ksk: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("ksk: {msg}");
            ExitCode::from(1)
        }
    }
}
