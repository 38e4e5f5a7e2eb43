use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skewvof::config::RunConfig;
use skewvof::runner;
use skewvof::sbp::verify_operator;

#[derive(Parser)]
#[command(name = "skewvof", version, about = "Energy-stable two-phase incompressible flow solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file.
    Run {
        config: PathBuf,
        /// Output directory, overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Abort when the energy identity fails at any stage.
        #[arg(long)]
        assert: bool,
        /// SBP order, overrides `sbp.order`.
        #[arg(long, value_parser = ["2", "4"])]
        order: Option<String>,
    },
    /// Check the one-dimensional operators.
    VerifyOps {
        #[arg(long, default_value = "2", value_parser = ["2", "4"])]
        order: String,
        #[arg(long, default_value_t = 33)]
        n: usize,
    },
    /// Print the energy budget of the initial state.
    Budget { config: PathBuf },
}

fn run(cmd: Command) -> skewvof::Result<()> {
    match cmd {
        Command::Run {
            config,
            out,
            assert,
            order,
        } => {
            let mut cfg = RunConfig::from_file(&config)?;
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            if assert {
                cfg.assert_identity = true;
            }
            if let Some(o) = order {
                cfg.order = o.parse().expect("validated by clap");
                cfg.grid()?;
            }
            let report = runner::run(&cfg, &cfg.out_dir)?;
            print!("{}", report.to_text());
        }
        Command::VerifyOps { order, n } => {
            let order: usize = order.parse().expect("validated by clap");
            let pairs: Vec<_> = (1..=10)
                .map(|s| {
                    let x = |i: usize| i as f64 / (n.max(2) - 1) as f64;
                    let u = (0..n).map(|i| (s as f64 * 3.1 * x(i)).sin() + x(i)).collect();
                    let v = (0..n).map(|i| (s as f64 * 1.7 * x(i) + 0.3).cos() * x(i)).collect();
                    (u, v)
                })
                .collect();
            let c = verify_operator(order, n, &pairs)?;
            println!("order = {}\nn = {}", c.order, c.n);
            println!(
                "sbp_defect = {:e}\nibp_defect = {:e}\naccuracy_defect = {:e}",
                c.sbp_defect, c.ibp_defect, c.accuracy_defect
            );
            let ok = c.sbp_defect <= 1e-13 && c.ibp_defect <= 1e-12 && c.accuracy_defect <= 1e-10;
            println!("{}", if ok { "PASS" } else { "FAIL" });
            if !ok {
                return Err(skewvof::Error::Solver("operator identities violated".into()));
            }
        }
        Command::Budget { config } => {
            let cfg = RunConfig::from_file(&config)?;
            let b = runner::budget(&cfg)?;
            println!("t = {:e}", b.t);
            println!("energy = {:e}", b.energy);
            println!("dE_dt = {:e}", b.de_dt);
            println!("dissipation = {:e}", b.dissipation);
            println!("bt_advective = {:e}", b.bt_advective);
            println!("bt_viscous = {:e}", b.bt_viscous);
            println!("sat_energy = {:e}", b.sat_energy);
            println!("constraint_work = {:e}", b.constraint_work);
            println!("forcing_work = {:e}", b.forcing_work);
            println!("data_flux = {:e}", b.data_flux);
            println!("residual = {:e}", b.residual);
            println!("relative_residual = {:e}", b.relative_residual());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
