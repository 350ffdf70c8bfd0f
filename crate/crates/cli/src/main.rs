//! `fracbvp` command line tool.
//!
//! Exit status: 0 on success or certificate found, 2 when no certificate is
//! found or the solver does not converge, 1 on any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use fracbvp::certify::{
    check_nonexistence, check_pattern, search_certificate, CertifyError, NonexistenceVariant, RadiusGrid,
};
use fracbvp::config::{load_config, ProblemConfig};
use fracbvp::report::{
    kernel_csv, solution_csv, to_json, write_atomic, write_json, CertifyReport, ConstantsFile, InitialState,
    SolveSidecar,
};
use fracbvp::solver::{cone_metrics, solve_picard, Grid, PicardOptions};
use fracbvp::{KernelModel, Pattern, Problem};

#[derive(Debug, Parser)]
#[command(name = "fracbvp", version)]
#[command(about = "Kernels, index-condition certificates and a Picard solver for nonlocal Caputo BVP systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Threshold constants (m, M, m_hat, M_hat, c, t*) per equation
    Constants {
        #[arg(long)]
        config: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Check an existence pattern or a nonexistence variant
    Certify {
        #[arg(long)]
        config: PathBuf,
        /// S1..S6, NE1, NE2 or NE3.
        #[arg(long)]
        pattern: Pattern,
        /// Radii, one per level (used for both equations) or two per level
        /// (`r_u,r_v,...`).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        ladder: Option<Vec<f64>>,
        /// Geometric radius grid `lo:hi:points` to search.
        #[arg(long)]
        search: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Damped Picard iteration on the discretized integral system
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Uniform intervals on [0, 1]; the breakpoints eta_i, b_i are added.
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        tol: f64,
        #[arg(long)]
        max_iter: usize,
        #[arg(long)]
        damping: f64,
        /// `const:a,b` or `file:path.csv` (columns t,u,v).
        #[arg(long)]
        init: String,
        /// Solution CSV; the JSON sidecar goes next to it with a .json extension.
        #[arg(long)]
        out: PathBuf,
    },

    /// Dump k(t,s) and Phi(s) on an n x n grid
    Kernel {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        which: u8,
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    // usage errors share status 1 with every other error; 2 is reserved
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Constants { config, out } => constants(&config, out.as_deref()),
        Command::Certify {
            config,
            pattern,
            ladder,
            search,
            out,
        } => certify(&config, pattern, ladder.as_deref(), search.as_deref(), out.as_deref()),
        Command::Solve {
            config,
            grid,
            tol,
            max_iter,
            damping,
            init,
            out,
        } => solve(&config, grid, PicardOptions { tol, max_iter, damping }, &init, &out),
        Command::Kernel {
            config,
            which,
            grid,
            out,
        } => kernel(&config, which, grid, &out),
    }
}

fn load(path: &Path) -> Result<ProblemConfig> {
    load_config(path).with_context(|| format!("loading {}", path.display()))
}

fn build(cfg: &ProblemConfig) -> Result<Problem> {
    let problem = cfg.build().context("computing threshold constants")?;
    warn_bounds(&problem);
    Ok(problem)
}

fn warn_bounds(problem: &Problem) {
    for (i, eq) in problem.equations().iter().enumerate() {
        let report = eq.model.verify_bounds(101, 101);
        if !report.upper_passed {
            let v = report.upper;
            eprintln!(
                "warning: equation {}: |k| exceeds Phi by {:.3e} at (t, s) = ({}, {})",
                i + 1,
                v.amount,
                v.t,
                v.s
            );
        }
        if !report.lower_passed {
            let v = report.lower;
            eprintln!(
                "warning: equation {}: k < c*Phi by {:.3e} at (t, s) = ({}, {})",
                i + 1,
                v.amount,
                v.t,
                v.s
            );
        }
        if !eq.constants.estimates_ordered {
            eprintln!(
                "warning: equation {}: envelope estimates are not ordered against the exact constants; \
                 conservative mode uses min(m, m_hat) and max(M, M_hat)",
                i + 1
            );
        }
    }
}

fn emit_json(json: String, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, json.as_bytes())?,
        None => print!("{json}"),
    }
    Ok(())
}

fn constants(config: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let problem = build(&load(config)?)?;
    emit_json(to_json(&ConstantsFile::from_problem(&problem))?, out)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_search(spec: &str) -> Result<RadiusGrid> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, points] = parts.as_slice() else {
        bail!("--search expects lo:hi:points, got `{spec}`");
    };
    Ok(RadiusGrid {
        lo: lo
            .trim()
            .parse()
            .with_context(|| format!("--search lower end `{lo}`"))?,
        hi: hi
            .trim()
            .parse()
            .with_context(|| format!("--search upper end `{hi}`"))?,
        points: points
            .trim()
            .parse()
            .with_context(|| format!("--search point count `{points}`"))?,
    })
}

fn ladder_pairs(pattern: Pattern, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    let levels = pattern.levels();
    if radii.len() == levels {
        Ok(radii.iter().map(|&r| (r, r)).collect())
    } else if radii.len() == 2 * levels {
        Ok(radii.chunks(2).map(|p| (p[0], p[1])).collect())
    } else {
        bail!(
            "pattern {pattern} needs {levels} radii (or {} as u,v pairs), got {}",
            2 * levels,
            radii.len()
        )
    }
}

fn certify(
    config: &Path,
    pattern: Pattern,
    ladder: Option<&[f64]>,
    search: Option<&str>,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let cfg = load(config)?;
    let problem = build(&cfg)?;
    let outcome = if pattern.is_existence() {
        match (ladder, search) {
            (Some(radii), None) => check_pattern(&problem, pattern, &ladder_pairs(pattern, radii)?).map(Some),
            (None, Some(spec)) => search_certificate(&problem, pattern, &parse_search(spec)?),
            _ => bail!("pattern {pattern} needs exactly one of --ladder or --search"),
        }
    } else {
        if ladder.is_some() || search.is_some() {
            bail!("nonexistence checks take their boxes from the config, not --ladder or --search");
        }
        let k = match pattern {
            Pattern::Nonexist1 => 1,
            Pattern::Nonexist2 => 2,
            _ => 3,
        };
        let variant = NonexistenceVariant::from_index(k).expect("1..=3");
        check_nonexistence(&problem, variant, &cfg.nonexistence_boxes).map(Some)
    };
    let report = match outcome {
        Ok(Some(cert)) => CertifyReport::found(cert),
        Ok(None) => CertifyReport::not_found(pattern, None),
        Err(CertifyError::ConditionFailed(c)) => CertifyReport::not_found(pattern, Some(*c)),
        Err(e) => return Err(anyhow!(e)),
    };
    emit_json(to_json(&report)?, out)?;
    if report.found {
        eprintln!("{pattern}: {}", report.message);
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{pattern}: no certificate found");
        Ok(ExitCode::from(2))
    }
}

fn initial_state(spec: &str, nodes: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if let Some(rest) = spec.strip_prefix("const:") {
        let vals: Vec<f64> = rest
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("--init `{spec}`"))?;
        let [a, b] = vals.as_slice() else {
            bail!("--init const: expects two values a,b");
        };
        return Ok((vec![*a; nodes.len()], vec![*b; nodes.len()]));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        return Ok(InitialState::read(Path::new(path))?.sample(nodes));
    }
    bail!("--init expects const:a,b or file:path.csv, got `{spec}`")
}

fn solve(config: &Path, n: usize, opts: PicardOptions, init: &str, out: &Path) -> Result<ExitCode> {
    let cfg = load(config)?;
    let problem = build(&cfg)?;
    let models = problem.models();
    let grid = Grid::build(models, n, &problem.settings().quad)?;
    let x0 = initial_state(init, grid.nodes())?;
    let [f1, f2] = [&problem.equation(0).f, &problem.equation(1).f];
    let sol = solve_picard(&grid, [f1, f2], x0, &opts)?;
    let sidecar = SolveSidecar {
        grid: n,
        nodes: grid.len(),
        options: opts,
        init: init.to_string(),
        residual_sup: sol.residual_sup,
        iterations: sol.iterations,
        converged: sol.converged,
        cone: cone_metrics(&sol, &models),
    };
    write_atomic(out, &solution_csv(&sol)?)?;
    write_json(&out.with_extension("json"), &sidecar)?;
    if sol.converged {
        eprintln!(
            "converged in {} iterations, residual {:.3e}",
            sol.iterations, sol.residual_sup
        );
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "not converged after {} iterations, residual {:.3e}",
            sol.iterations, sol.residual_sup
        );
        Ok(ExitCode::from(2))
    }
}

fn kernel(config: &Path, which: u8, n: usize, out: &Path) -> Result<ExitCode> {
    if n < 2 {
        bail!("--grid must be at least 2");
    }
    let cfg = load(config)?;
    let model = KernelModel::new(cfg.params[which as usize - 1]);
    write_atomic(out, &kernel_csv(&model, n)?)?;
    Ok(ExitCode::SUCCESS)
}
