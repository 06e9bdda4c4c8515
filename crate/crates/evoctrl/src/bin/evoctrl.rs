//! Command-line front end: run experiments, run the invariant check
//! suite, export L-shape meshes.
//!
//! Exit codes: 0 success, 1 check failure, 2 solver nonconvergence,
//! 3 configuration error.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use evoctrl::experiments::{
    apply_overrides, check_suite, parse_config, run_experiment, ExperimentError,
};
use evoctrl::fem2d::build_lshape_mesh;

#[derive(Parser)]
#[command(name = "evoctrl", about = "optimal control of semidiscretized evolution equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a flat `key = value` config file.
    Run {
        /// path to the config file
        config: PathBuf,
        /// override a config key, e.g. `--set n=32` (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Run the invariant check suite and print the report.
    Check {
        /// seed for the randomized checks
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// negative control: corrupt the adjoint inside the duality
        /// check; the suite must then fail
        #[arg(long, hide = true)]
        corrupt_adjoint: bool,
    },
    /// Build the structured L-shape mesh and export it as CSV.
    Mesh {
        /// squares per unit side (mesh size h = 1/n)
        #[arg(long)]
        n: usize,
        /// output directory
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, sets } => cmd_run(&config, &sets),
        Command::Check { seed, corrupt_adjoint } => cmd_check(seed, corrupt_adjoint),
        Command::Mesh { n, out } => cmd_mesh(n, &out),
    }
}

fn cmd_run(config: &PathBuf, sets: &[String]) -> ExitCode {
    let text = match fs::read_to_string(config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(3);
        }
    };
    let mut cfg = match parse_config(&text).and_then(|mut c| {
        apply_overrides(&mut c, sets)?;
        Ok(c)
    }) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    // relative output paths are taken as given (cwd-relative)
    if cfg.out.as_os_str().is_empty() {
        cfg.out = PathBuf::from(".");
    }
    match run_experiment(&cfg) {
        Ok(summary) => {
            println!(
                "{} finished: J(u_opt) = {:.6e} (J(0) = {:.6e}), {} iterations, artifacts in {}",
                cfg.experiment.name(),
                summary.cost_opt,
                summary.cost_zero,
                summary.iterations,
                cfg.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(ExperimentError::NonConvergence(msg)) => {
            eprintln!("error: solver did not converge: {msg}");
            eprintln!("partial artifacts left in {}", cfg.out.display());
            ExitCode::from(2)
        }
        Err(ExperimentError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn cmd_check(seed: u64, corrupt_adjoint: bool) -> ExitCode {
    let report = check_suite(seed, corrupt_adjoint);
    print!("{}", report.render());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_mesh(n: usize, out: &PathBuf) -> ExitCode {
    if n < 1 {
        eprintln!("error: n must be ≥ 1");
        return ExitCode::from(3);
    }
    if let Err(e) = fs::create_dir_all(out) {
        eprintln!("error: cannot create {}: {e}", out.display());
        return ExitCode::from(3);
    }
    let mesh = build_lshape_mesh(n);
    let mut boundary = String::from("v0,v1,marker\n");
    for e in &mesh.gamma0_edges {
        let _ = writeln!(boundary, "{},{},gamma0", e[0], e[1]);
    }
    for e in &mesh.gamma1_edges {
        let _ = writeln!(boundary, "{},{},gamma1", e[0], e[1]);
    }
    for (name, contents) in [
        ("vertices.csv", mesh.vertices_csv()),
        ("triangles.csv", mesh.triangles_csv()),
        ("boundary_edges.csv", boundary),
    ] {
        if let Err(e) = fs::write(out.join(name), contents) {
            eprintln!("error: cannot write {name}: {e}");
            return ExitCode::from(3);
        }
    }
    println!(
        "mesh n={n}: {} vertices, {} triangles → {}",
        mesh.n_vertices(),
        mesh.triangles.len(),
        out.display()
    );
    ExitCode::SUCCESS
}
