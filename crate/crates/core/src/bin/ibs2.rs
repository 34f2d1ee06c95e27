//! Command-line front end: basis tables, synthesis, far-field import, inversion,
//! bounds and rendering.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ibs2::app::config::RunConfig;
use ibs2::app::io::{
    cache_dir_from_env, load_or_build_basis, parse_farfield_csv, read_dataset, read_farfield, read_field, read_field_meta, write_atomic, write_dataset, write_field, write_json,
    FieldData,
};
use ibs2::app::render::{render_rows, Panel};
use ibs2::app::{bounds_run, build_operators, invert_report, invert_run, synth_run};
use ibs2::born::{Provenance, ScatterDataset};
use ibs2::grids::{map_farfield_to_pnodes, map_farfield_to_scaled_pnodes, scale_farfield, FarFieldMatrix, PNodeSet, RealField};
use ibs2::pswf::BasisCaps;
use ibs2::{Error, Result};

#[derive(Parser)]
#[command(name = "ibs2", version, about = "Two-contrast inverse Born series for 2-D Helmholtz scattering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build (and cache) a disk PSWF basis and write its eigenvalue table as CSV.
    Pswf {
        #[arg(long)]
        k: f64,
        #[arg(long, default_value_t = 0.9)]
        alpha_tilde: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate media, synthesize two-frequency data and add noise.
    Synth {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for `dataset.json`, `gamma.fld` and `eta.fld`.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Map far-field matrices at `k` and `ℓk` (binary or `i,j,re,im` CSV) to a dataset.
    Import {
        #[arg(long)]
        farfield: PathBuf,
        #[arg(long)]
        farfield_high: PathBuf,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        ell: f64,
        /// Optional run configuration supplying the node counts.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the inverse Born series on a dataset.
    Invert {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output directory for term fields, partial sums and `report.json`.
        #[arg(long)]
        out: PathBuf,
        /// Directory holding `gamma.fld` and `eta.fld` of the true media.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Evaluate the convergence constants and bounds.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        /// Directory with the true media; generated from the configuration when absent.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Dataset to reconstruct for the data-dependent quantities.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render field files as PNG heatmaps with one shared color scale per row.
    Render {
        /// Field files, filled row by row.
        #[arg(long, num_args = 1.., required = true)]
        fields: Vec<PathBuf>,
        /// Panels per row; all in one row when absent.
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        match e {
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Pswf { k, alpha_tilde, out } => pswf(k, alpha_tilde, &out),
        Command::Synth { config, out } => synth(&RunConfig::from_path(&config)?, &out),
        Command::Import { farfield, farfield_high, k, ell, config, out } => {
            let cfg = config.as_deref().map(RunConfig::from_path).transpose()?;
            import(&farfield, &farfield_high, k, ell, cfg.as_ref(), &out)
        }
        Command::Invert { config, data, out, truth } => invert(&RunConfig::from_path(&config)?, &data, &out, truth.as_deref()),
        Command::Bounds { config, truth, data, out } => bounds(&RunConfig::from_path(&config)?, truth.as_deref(), data.as_deref(), out.as_deref()),
        Command::Render { fields, cols, out } => render(&fields, cols, &out),
    }
}

fn pswf(k: f64, alpha_tilde: f64, out: &Path) -> Result<()> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("k must be positive, got {k}")));
    }
    let c = 2.0 * k;
    let cache = cache_dir_from_env();
    let (basis, hit) = load_or_build_basis(c, alpha_tilde, BasisCaps::default_for(c), cache.as_deref())?;
    let mut table = String::from("m,n,l,chi,abs_alpha,residual\n");
    for e in basis.entries() {
        writeln!(table, "{},{},{},{:e},{:e},{:e}", e.m, e.n, e.l, e.chi, e.alpha.norm(), e.residual).expect("write to string");
    }
    write_atomic(out, table.as_bytes())?;
    eprintln!("{} retained modes, |alpha_00| = {:.6}{}", basis.len(), basis.alpha00().norm(), if hit { " (cached)" } else { "" });
    Ok(())
}

fn synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let s = synth_run(cfg)?;
    std::fs::create_dir_all(out)?;
    write_dataset(&out.join("dataset.json"), &s.dataset)?;
    let media = serde_json::to_value(&cfg.media).ok();
    write_field(&out.join("gamma.fld"), &FieldData::Real(s.gamma), "γ", None, media.clone())?;
    write_field(&out.join("eta.fld"), &FieldData::Real(s.eta), "η", None, media)?;
    if !s.dataset.all_converged() {
        eprintln!("warning: forward series did not converge at every node");
    }
    Ok(())
}

fn read_any_farfield(path: &Path, k: f64) -> Result<FarFieldMatrix> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        parse_farfield_csv(&std::fs::read_to_string(path)?, k)
    } else {
        let f = read_farfield(path)?;
        if (f.k() - k).abs() > 1e-12 * k {
            return Err(Error::Format(format!("{} holds frequency {}, expected {k}", path.display(), f.k())));
        }
        Ok(f)
    }
}

fn import(low: &Path, high: &Path, k: f64, ell: f64, cfg: Option<&RunConfig>, out: &Path) -> Result<()> {
    let pnodes = match cfg {
        Some(c) => c.pnode_set()?,
        None => PNodeSet::default_for(k)?,
    };
    let low_f = scale_farfield(&read_any_farfield(low, k)?);
    let high_f = scale_farfield(&read_any_farfield(high, ell * k)?);
    let low_d = map_farfield_to_pnodes(&low_f, &pnodes)?;
    let high_d = map_farfield_to_scaled_pnodes(&high_f, &pnodes, ell)?;
    let source = format!("{} + {}", low.display(), high.display());
    let data = ScatterDataset::new(low_d, high_d, ell, Provenance::Imported { source })?;
    write_dataset(out, &data)
}

fn read_truth(dir: &Path) -> Result<(RealField, RealField)> {
    Ok((read_field(&dir.join("gamma.fld"))?.real(), read_field(&dir.join("eta.fld"))?.real()))
}

fn invert(cfg: &RunConfig, data: &Path, out: &Path, truth: Option<&Path>) -> Result<()> {
    let data = read_dataset(data)?;
    let cache = cache_dir_from_env();
    let (result, ops) = invert_run(cfg, &data, cache.as_deref())?;
    let truth = truth.map(read_truth).transpose()?;
    let bounds = match &truth {
        Some((g, e)) => Some(bounds_run(cfg, g, e, &ops[0], Some(&result))?),
        None => None,
    };
    let report = invert_report(&result, &ops[0], truth.as_ref().map(|(g, e)| (g, e)), bounds.as_ref())?;
    std::fs::create_dir_all(out)?;
    let k = Some(data.k);
    for (j, (term, sum)) in result.terms.iter().zip(&result.partial_sums).enumerate() {
        let j = j + 1;
        write_field(&out.join(format!("term_gamma_{j}.fld")), &FieldData::Complex(term.gamma.clone()), &format!("γ_{j}"), k, None)?;
        write_field(&out.join(format!("term_eta_{j}.fld")), &FieldData::Complex(term.eta.clone()), &format!("η_{j}"), k, None)?;
        write_field(&out.join(format!("gamma_{j}.fld")), &FieldData::Complex(sum.gamma.clone()), &format!("γ_{j}"), k, None)?;
        write_field(&out.join(format!("eta_{j}.fld")), &FieldData::Complex(sum.eta.clone()), &format!("η_{j}"), k, None)?;
    }
    write_json(&out.join("report.json"), &report)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn bounds(cfg: &RunConfig, truth: Option<&Path>, data: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let (gamma, eta) = match truth {
        Some(dir) => read_truth(dir)?,
        None => ibs2::app::media::generate_media(&cfg.media, cfg.grid()?)?,
    };
    let cache = cache_dir_from_env();
    let report = match data {
        Some(path) => {
            let data = read_dataset(path)?;
            let (result, ops) = invert_run(cfg, &data, cache.as_deref())?;
            bounds_run(cfg, &gamma, &eta, &ops[0], Some(&result))?
        }
        None => {
            let grid = cfg.grid()?;
            let ops = build_operators(cfg, grid, &cfg.pnode_set()?, cfg.pair()?, cache.as_deref())?;
            bounds_run(cfg, &gamma, &eta, &ops[0], None)?
        }
    };
    match out {
        Some(path) => write_json(path, &report),
        None => {
            println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?);
            Ok(())
        }
    }
}

fn render(fields: &[PathBuf], cols: Option<usize>, out: &Path) -> Result<()> {
    let cols = cols.unwrap_or(fields.len());
    if cols == 0 {
        return Err(Error::InvalidArgument("cols must be positive".into()));
    }
    let mut panels = Vec::with_capacity(fields.len());
    for path in fields {
        let field = read_field(path)?.real();
        let label = match read_field_meta(path) {
            Ok(meta) => meta.label,
            Err(_) => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        };
        panels.push(Panel { label, field });
    }
    let rows: Vec<Vec<Panel>> = panels.chunks(cols).map(|c| c.to_vec()).collect();
    write_atomic(out, &render_rows(&rows)?)
}
