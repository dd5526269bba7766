use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use darcy_afem::adapt::{AdaptObserver, LevelView};
use darcy_afem::experiment::{run_observed, ExperimentConfig};
use darcy_afem::Error;

#[derive(Parser)]
#[command(name = "darcy-afem", version, about = "Adaptive Darcy-Forchheimer / transport experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write CSV output.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// manufactured | cavity
    #[arg(long)]
    case: Option<String>,
    /// Cells per side of the initial uniform grid.
    #[arg(long)]
    n: Option<usize>,
    /// uniform | adaptive
    #[arg(long)]
    mode: Option<String>,
    /// Dörfler bulk fraction in (0, 1].
    #[arg(long)]
    theta: Option<f64>,
    /// Picard damping parameter.
    #[arg(long)]
    gamma: Option<f64>,
    /// Forchheimer coefficient.
    #[arg(long)]
    beta: Option<f64>,
    /// Picard stops once eta_L <= gamma_bar * eta_D.
    #[arg(long)]
    gamma_bar: Option<f64>,
    /// Global tolerance on eta_D.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_levels: Option<usize>,
    #[arg(long)]
    max_picard: Option<usize>,
    /// paper (sum of element norms) | l2
    #[arg(long)]
    aggregation: Option<String>,
    /// Cavity lid concentration as an expression in x and y.
    #[arg(long)]
    cavity_top_expr: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write VTK, indicator and state files per level.
    #[arg(long)]
    dump: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// key=value file with defaults; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl RunArgs {
    fn flag_pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut push = |k: &'static str, x: Option<String>| {
            if let Some(x) = x {
                v.push((k, x));
            }
        };
        push("case", self.case.clone());
        push("n", self.n.map(|x| x.to_string()));
        push("mode", self.mode.clone());
        push("theta", self.theta.map(|x| x.to_string()));
        push("gamma", self.gamma.map(|x| x.to_string()));
        push("beta", self.beta.map(|x| x.to_string()));
        push("gamma-bar", self.gamma_bar.map(|x| x.to_string()));
        push("eps", self.eps.map(|x| x.to_string()));
        push("max-levels", self.max_levels.map(|x| x.to_string()));
        push("max-picard", self.max_picard.map(|x| x.to_string()));
        push("aggregation", self.aggregation.clone());
        push("cavity-top-expr", self.cavity_top_expr.clone());
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        if self.dump {
            push("dump", Some("true".into()));
        }
        v
    }

    fn experiment(&self) -> Result<ExperimentConfig, Error> {
        let mut config = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)?;
            for (k, v) in ExperimentConfig::parse_pairs(&text)? {
                config.apply(&k, &v)?;
            }
        }
        for (k, v) in self.flag_pairs() {
            config.apply(k, &v)?;
        }
        config.validate()?;
        Ok(config)
    }
}

struct Progress;

impl AdaptObserver for Progress {
    fn level(&mut self, view: &LevelView) -> darcy_afem::Result<()> {
        let r = view.record;
        let mut line = format!(
            "level {:>2}  triangles {:>7}  dof {:>8}  eta_L {:.4e}  eta_D {:.4e}  picard {:>3} ({})",
            r.level, r.triangles, r.dof, r.eta_l, r.eta_d, r.picard_iterations, r.stop_reason
        );
        if let Some(e) = &r.errors {
            line += &format!("  Err {:.4e}  EI {:.4}", e.err, e.effectivity_index(r.eta_l, r.eta_d));
        } else {
            line += &format!("  E_tot {:.4e}", r.e_tot);
        }
        println!("{line}");
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run(args) = cli.command;
    let config = match args.experiment() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build_global() {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(2);
    }
    match run_observed(&config, &mut Progress) {
        Ok(_) => {
            println!("output written to {}", config.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
