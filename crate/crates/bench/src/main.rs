use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparsepg::stationarity::write_gmap_csv;
use sparsepg_bench::experiments::{
    self, default_gmap_grid, GmapParams, PROX_CURVES, TABLE_BAD_SIZES, TABLE_MESH_SIZES, TABLE_P_VALUES,
};
use sparsepg_bench::report::Table;
use sparsepg_bench::{ExperimentConfig, Preset, Result};

#[derive(Parser)]
#[command(name = "sparsepg", version, about = "Proximal gradient experiments for sparse optimal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Named preset: example1, example2, example3, bad-params.
    #[arg(long)]
    preset: Option<String>,
    /// `key = value` file applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single overrides, e.g. `--set n=80 --set p=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self, default: Preset) -> Result<ExperimentConfig> {
        let preset = match &self.preset {
            Some(name) => Preset::from_name(name)?,
            None => default,
        };
        let mut cfg = preset.config();
        if let Some(path) = &self.config {
            cfg = ExperimentConfig::from_file(path, &cfg)?;
        }
        cfg = cfg.with_overrides(&self.overrides)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write history, fields and a summary.
    Solve(ConfigArgs),
    /// Decreasing p on one mesh.
    TableP {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Cells per side.
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
    },
    /// Mesh refinement for p = 0.5.
    TableMesh {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
    },
    /// The bad-parameter regime with the Ω_m series.
    TableBad {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
    },
    /// Samples q -> prox(q); without --s both reference curves are written.
    ProxCurve {
        #[arg(long)]
        s: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        b: f64,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = -5.0)]
        q_min: f64,
        #[arg(long, default_value_t = 5.0)]
        q_max: f64,
        #[arg(long, default_value_t = 2001)]
        count: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Point cloud of the stationarity map.
    GmapCurve {
        #[arg(long, default_value_t = 0.1)]
        lipschitz: f64,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[arg(long, default_value_t = 0.01)]
        beta: f64,
        #[arg(long, default_value_t = 2.0)]
        b: f64,
        #[arg(long, default_value_t = 0.8)]
        p: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Finite-difference check of the adjoint gradient.
    FdCheck {
        #[arg(long, default_value_t = 40)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Manufactured-solution convergence of the state solver.
    MmsCheck {
        #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
        n: Vec<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn emit(table: &Table, dir: &Path, stem: &str) -> Result<()> {
    let (csv, txt) = table.save(dir, stem)?;
    print!("{}", table.to_text());
    println!("wrote {} and {}", csv.display(), txt.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = args.resolve(Preset::Example1)?;
            let solved = experiments::solve(&cfg)?;
            experiments::write_solution(&solved, &cfg.output_dir)?;
            print!("{}", solved.summary.to_text());
            println!("wrote {}", cfg.output_dir.display());
        }
        Command::TableP { cfg, n, p } => {
            let base = ExperimentConfig { n, ..cfg.resolve(Preset::Example1)? };
            let ps = p.unwrap_or_else(|| TABLE_P_VALUES.to_vec());
            let (_, table) = experiments::table_p(&base, &ps)?;
            emit(&table, &base.output_dir, "table_p")?;
        }
        Command::TableMesh { cfg, n } => {
            let base = cfg.resolve(Preset::Example1)?;
            let ns = n.unwrap_or_else(|| TABLE_MESH_SIZES.to_vec());
            let (_, table) = experiments::table_mesh(&base, &ns)?;
            emit(&table, &base.output_dir, "table_mesh")?;
        }
        Command::TableBad { cfg, n } => {
            let base = cfg.resolve(Preset::BadParams)?;
            let ns = n.unwrap_or_else(|| TABLE_BAD_SIZES.to_vec());
            let (runs, table) = experiments::table_bad(&base, &ns)?;
            emit(&table, &base.output_dir, "table_bad")?;
            let omega = experiments::omega_table(&runs);
            let (csv, _) = omega.save(&base.output_dir, "omega_m")?;
            println!("wrote {}", csv.display());
        }
        Command::ProxCurve {
            s,
            b,
            p,
            q_min,
            q_max,
            count,
            out,
        } => {
            let sets = match s {
                Some(s) => vec![(s, b, p)],
                None => PROX_CURVES.to_vec(),
            };
            fs::create_dir_all(&out)?;
            for (s, b, p) in sets {
                let table = experiments::prox_curve(s, b, p, q_min, q_max, count)?;
                let path = out.join(format!("prox_s{s}_b{b}_p{p}.csv"));
                table.write_csv(fs::File::create(&path)?)?;
                println!("wrote {}", path.display());
            }
        }
        Command::GmapCurve {
            lipschitz,
            alpha,
            beta,
            b,
            p,
            out,
        } => {
            let params = GmapParams {
                lipschitz,
                alpha,
                beta,
                b,
                p,
            };
            let sample = experiments::gmap_curve(params, &default_gmap_grid(b))?;
            fs::create_dir_all(&out)?;
            let path = out.join("gmap.csv");
            write_gmap_csv(&sample, fs::File::create(&path)?)?;
            println!("{} members, grid tolerance {:.3e}", sample.points.len(), sample.grid_tol);
            println!("wrote {}", path.display());
        }
        Command::FdCheck { n, seed, out } => {
            emit(&experiments::fd_table(n, seed)?, &out, "fd_check")?;
        }
        Command::MmsCheck { n, out } => {
            emit(&experiments::mms_table(&n)?, &out, "mms_check")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
