use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use elastowave::diagnostics::relative_misfit;
use elastowave::harness::config::{parse_quantity, Damping, Quantity, RunConfig};
use elastowave::harness::experiments::{
    check_operators, compare_abc_pml, h_convergence, p_convergence, pml_error, run_simulation, write_comparison,
    write_convergence_report,
};
use elastowave::harness::output::{ingest_reference, write_metadata, write_series};
use elastowave::harness::presets::{apply_overrides, preset, PresetOverrides, PRESET_NAMES};
use elastowave::harness::{parse_config, Simulation};
use elastowave::{Error, Result};

#[derive(Parser)]
#[command(name = "elastowave", version, about = "DG spectral-element elastic wave solver with a stable PML")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a configuration file.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Also measure the PML error against an enlarged-domain reference.
        #[arg(long)]
        pml_error: bool,
        /// Compare PML and pure absorbing-boundary seismograms at this receiver.
        #[arg(long, value_name = "RECEIVER")]
        compare_abc: Option<String>,
        /// Misfit of a receiver against an external seismogram, as NAME=PATH.
        #[arg(long, value_name = "NAME=PATH")]
        reference: Vec<String>,
    },
    /// Run a named benchmark preset, optionally desk-scaled.
    Preset {
        /// One of strip2d, halfplane2d, hws3d, hhs3d, loh1, planewave.
        name: String,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Print the resolved configuration instead of running.
        #[arg(long)]
        print_config: bool,
        #[arg(long)]
        pml_error: bool,
        #[arg(long, value_name = "RECEIVER")]
        compare_abc: Option<String>,
    },
    /// Verify the one-dimensional operators for every quadrature family.
    CheckOperators {
        #[arg(long, default_value_t = 12)]
        max_degree: usize,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// h- or p-convergence study on a configuration file or preset name.
    Convergence {
        config: String,
        /// Element spacings, e.g. `10km,5km,2.5km`.
        #[arg(long, value_delimiter = ',')]
        levels: Vec<String>,
        /// Polynomial degrees for a p-convergence study.
        #[arg(long, value_delimiter = ',')]
        degrees: Vec<usize>,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

#[derive(clap::Args, Default)]
struct OverrideArgs {
    /// Elements along the shortest axis of the mesh box.
    #[arg(long)]
    elements: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    /// PML stabilization switch (0 or 1).
    #[arg(long)]
    theta: Option<f64>,
    /// Final time in seconds (unit suffixes accepted).
    #[arg(long)]
    tend: Option<String>,
    /// PML reflection tolerance, or `auto`.
    #[arg(long)]
    tol: Option<String>,
}

impl OverrideArgs {
    fn resolve(&self) -> Result<PresetOverrides> {
        let invalid = |m: String| Error::Validation(vec![m]);
        if let Some(theta) = self.theta {
            if theta != 0.0 && theta != 1.0 {
                return Err(invalid(format!("--theta must be 0 or 1, got {theta}")));
            }
        }
        let t_end = self
            .tend
            .as_deref()
            .map(|t| parse_quantity(t, Quantity::Time).map_err(|m| invalid(format!("--tend: {m}"))))
            .transpose()?;
        let damping = match self.tol.as_deref() {
            None => None,
            Some("auto") => Some(Damping::Auto),
            Some(t) => Some(Damping::Tol(t.trim().parse().map_err(|_| invalid(format!("--tol: cannot parse '{t}'")))?)),
        };
        Ok(PresetOverrides { elements: self.elements, degree: self.degree, theta: self.theta, t_end, damping })
    }
}

fn load_config(source: &str) -> Result<RunConfig> {
    if PRESET_NAMES.contains(&source) && !Path::new(source).exists() {
        return preset(source, &PresetOverrides::default());
    }
    parse_config(&std::fs::read_to_string(source)?)
}

fn default_dir(cfg: &RunConfig, given: Option<PathBuf>) -> PathBuf {
    given.unwrap_or_else(|| PathBuf::from("output").join(&cfg.name))
}

fn execute(cfg: &RunConfig, dir: &Path, with_pml_error: bool, compare: Option<&str>, references: &[String]) -> Result<()> {
    let sim = Simulation::new(cfg)?;
    println!(
        "{}: {}D, degree {}, {} elements, dt = {:.6e} s, t_end = {} s{}",
        cfg.name,
        cfg.dim,
        cfg.degree,
        sim.solver.mesh().num_elements(),
        sim.dt,
        cfg.t_end,
        if cfg.desk_scaled { " (desk-scaled)" } else { "" }
    );
    let out = run_simulation(&sim, Some(dir))?;
    println!("completed {} steps; outputs in {}", out.steps, dir.display());
    if let Some(&(t, v)) = out.linf.last() {
        println!("final max |v| = {v:.6e} at t = {t}");
    }
    let mut summary = Vec::new();
    for spec in references {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| Error::Validation(vec![format!("--reference expects NAME=PATH, got '{spec}'")]))?;
        let receiver = out
            .receivers
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::Validation(vec![format!("unknown receiver '{name}'")]))?;
        let header = elastowave::harness::experiments::receiver_header(cfg, receiver);
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let reference = ingest_reference(Path::new(path), &header)?;
        let misfit = relative_misfit(&receiver.samples, &reference.interpolate(&receiver.times)?)?;
        println!("receiver {name}: relative misfit against {path} = {misfit:.6e}");
        summary.push((format!("misfit.{name}"), format!("{misfit:e}")));
    }
    if with_pml_error {
        let report = pml_error(cfg)?;
        write_series(&dir.join("pml_error.csv"), &report.series)?;
        println!("PML error (max over interior nodes and samples) = {:.6e}", report.error);
        summary.push(("pml_error".into(), format!("{:e}", report.error)));
    }
    if let Some(receiver) = compare {
        let cmp = compare_abc_pml(cfg, receiver)?;
        write_comparison(&dir.join("comparison"), &cmp, cfg.dim)?;
        println!(
            "receiver {receiver}: PML misfit {:.6e}, ABC misfit {:.6e}, ratio {:.4}",
            cmp.pml_misfit,
            cmp.abc_misfit,
            cmp.ratio()
        );
    }
    if !summary.is_empty() {
        write_metadata(&dir.join("summary.txt"), &summary)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, output_dir, pml_error, compare_abc, reference } => {
            let cfg = parse_config(&std::fs::read_to_string(&config)?)?;
            let dir = default_dir(&cfg, output_dir);
            execute(&cfg, &dir, pml_error, compare_abc.as_deref(), &reference)
        }
        Command::Preset { name, overrides, output_dir, print_config, pml_error, compare_abc } => {
            let cfg = preset(&name, &overrides.resolve()?)?;
            if print_config {
                print!("{}", cfg.to_text());
                return Ok(());
            }
            let dir = default_dir(&cfg, output_dir);
            execute(&cfg, &dir, pml_error, compare_abc.as_deref(), &[])
        }
        Command::CheckOperators { max_degree, output_dir } => {
            let rows = check_operators(max_degree)?;
            let mut text = String::from("degree,quadrature,sbp_residual,derivative_error,weight_sum_error\n");
            let mut worst: f64 = 0.0;
            for r in &rows {
                text.push_str(&format!(
                    "{},{},{:.3e},{:.3e},{:.3e}\n",
                    r.degree,
                    r.kind.name(),
                    r.sbp_residual,
                    r.derivative_error,
                    r.weight_sum_error
                ));
                worst = worst.max(r.sbp_residual).max(r.derivative_error).max(r.weight_sum_error);
            }
            print!("{text}");
            println!("worst residual: {worst:.3e}");
            if let Some(dir) = output_dir {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("operators.csv"), text)?;
            }
            Ok(())
        }
        Command::Convergence { config, levels, degrees, overrides, output_dir } => {
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, &overrides.resolve()?)?;
            let dir = default_dir(&cfg, output_dir).join("convergence");
            let (name, rows) = match (levels.is_empty(), degrees.is_empty()) {
                (false, true) => {
                    let spacings = levels
                        .iter()
                        .map(|l| {
                            parse_quantity(l, Quantity::Length)
                                .map_err(|m| Error::Validation(vec![format!("--levels: {m}")]))
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    ("h", h_convergence(&cfg, &spacings)?)
                }
                (true, false) => ("degree", p_convergence(&cfg, &degrees)?),
                _ => return Err(Error::Validation(vec!["give exactly one of --levels or --degrees".into()])),
            };
            write_convergence_report(&dir, name, &rows, &cfg)?;
            println!("{name},error,rate");
            for r in &rows {
                let rate = r.rate.map(|v| format!("{v:.3}")).unwrap_or_default();
                println!("{},{:.6e},{rate}", r.level, r.error);
            }
            println!("table written to {}", dir.join("convergence.csv").display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
