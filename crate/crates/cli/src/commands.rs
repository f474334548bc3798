use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tamq_core::measurement::{synthesize_dataset, CountsImage};
use tamq_core::states::{fidelity, DensityDoc};
use tamq_core::tomography::{
    fit_coefficients, reconstruct_with, report, CoefficientFit, ReconstructOptions,
    ReconstructionDoc, ReconstructionResult, Summary, SummaryRow,
};
use tamq_core::wigner::{slice_difference, wigner_slice_axes, Axis, OutputState, SlicePair};
use tamq_core::{
    full_channel, Basis, DensityMatrix, Error, HbKind, ModeBank, Polarization, TomographyDataset,
};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::manifest::{DirLock, Manifest};
use crate::plot;
use crate::{Cli, Command, GlobalArgs};

struct Context {
    cfg: RunConfig,
    out: Option<PathBuf>,
    emit_png: bool,
}

impl Context {
    fn new(g: &GlobalArgs) -> Result<Self> {
        let mut cfg = match &g.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = g.seed {
            cfg.seed = s;
        }
        let emit_png = g.emit_png || cfg.emit_png;
        Ok(Context {
            cfg,
            out: g.out.clone(),
            emit_png,
        })
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| self.cfg.output.clone())
    }

    fn out_file(&self, default_name: &str) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| self.cfg.output.join(default_name))
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let ctx = Context::new(&cli.global)?;
    match cli.command {
        Command::Channel { input, basis } => channel(&input, &basis),
        Command::Simulate => simulate(&ctx),
        Command::Fit { dataset, modes } => fit(&ctx, &dataset, &modes),
        Command::Reconstruct {
            dataset,
            input,
            basis,
            no_background,
        } => reconstruct(&ctx, &dataset, &input, &basis, no_background),
        Command::Fidelity {
            rho,
            target,
            target_rho,
        } => fidelity_cmd(&ctx, &rho, target, target_rho),
        Command::Wigner {
            state,
            rho,
            slices,
            points,
            extent,
            modes,
            compare_ideal,
        } => wigner(
            &ctx,
            &state,
            rho.as_deref(),
            &slices,
            points,
            extent,
            &modes,
            compare_ideal,
        ),
        Command::Report { rho, sweep } => report_cmd(&ctx, &rho, sweep),
        Command::Verify { dir } => verify(dir.unwrap_or_else(|| ctx.out_dir())),
    }
}

/// Fixed-point text with 15 significant digits; roundoff below 1e-15 prints as 0.
pub fn sig15(x: f64) -> String {
    if x.abs() < 1e-15 {
        return "0".into();
    }
    let e = x.abs().log10().floor() as i32;
    let decimals = (14 - e).clamp(0, 40) as usize;
    format!("{x:.decimals$}")
}

fn channel(input: &str, basis: &str) -> Result<()> {
    let pol: Polarization = input.parse()?;
    let basis: Basis = basis.parse()?;
    let s = full_channel(&pol.jones()).change_basis(basis);
    println!("# input {pol}, basis {basis}, components |1>..|4> as (re, im)");
    for (k, a) in s.amplitudes.iter().enumerate() {
        println!("|{}>  {}  {}", k + 1, sig15(a.re), sig15(a.im));
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn file_name(path: &Path) -> Result<String> {
    path.file_name()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| CliError::Usage(format!("{} is not a file path", path.display())))
}

fn simulate(ctx: &Context) -> Result<()> {
    let dir = ctx.out_dir();
    let _lock = DirLock::acquire(&dir)?;
    let ds = synthesize_dataset(&ctx.cfg.dataset_spec(0))?;
    let mut manifest = Manifest::new(ctx.cfg.hash());
    let written = ds.write_dir(&dir)?;
    for (name, role) in &written {
        manifest.record(&dir, name, role)?;
    }
    if ctx.emit_png {
        let images = written
            .iter()
            .filter(|(_, r)| *r == "image")
            .map(|(n, _)| n);
        for (name, img) in images.zip(&ds.images) {
            let png_name = name.replace(".pgm", ".png");
            let values: Vec<f64> = img.counts.iter().map(|&c| c as f64).collect();
            plot::write_png(
                &dir.join(&png_name),
                img.grid.n_pixels,
                &plot::sequential(&values),
            )?;
            manifest.record(&dir, &png_name, "plot")?;
        }
    }
    let mut resolved = ctx.cfg.clone();
    resolved.output = PathBuf::new();
    resolved.profile = Some(ctx.cfg.profile());
    write_json(&dir.join("config.json"), &resolved)?;
    manifest.record(&dir, "config.json", "config")?;
    manifest.write(&dir)?;
    println!("wrote {} images to {}", ds.images.len(), dir.display());
    Ok(())
}

fn load_dataset(dir: &Path) -> Result<TomographyDataset> {
    Ok(TomographyDataset::read_dir(dir)?)
}

#[derive(Serialize)]
struct FitRecord {
    image: String,
    input: Option<String>,
    analyzer: Option<String>,
    dark: bool,
    #[serde(flatten)]
    fit: CoefficientFit,
}

fn fit(ctx: &Context, dataset: &Path, modes: &str) -> Result<()> {
    let ds = load_dataset(dataset)?;
    let bank = ModeBank::new(&ds.grid, &ds.profile)?;
    let basis = match modes {
        "oam" => bank.oam.to_vec(),
        "hb" => [HbKind::HB11, HbKind::HB20, HbKind::HB02]
            .map(|k| bank.hermite_bessel(k))
            .to_vec(),
        other => {
            return Err(CliError::Usage(format!(
                "unknown mode set {other:?} (expected oam or hb)"
            )))
        }
    };
    let na = ds.analyzers.len();
    let mut records = Vec::new();
    let mut failed = None;
    for (k, img) in ds.images.iter().enumerate() {
        let fit = match fit_coefficients(img, &basis) {
            Ok(f) => f,
            Err(Error::FitNonConvergence(best)) => {
                failed.get_or_insert_with(|| Error::FitNonConvergence(best.clone()));
                *best
            }
            Err(e) => return Err(e.into()),
        };
        records.push(FitRecord {
            image: format!("r{}c{}", k / na, k % na),
            input: img.meta.input.clone(),
            analyzer: img.meta.analyzer.clone(),
            dark: img.meta.dark,
            fit,
        });
    }
    let out = ctx.out_file("fits.json");
    let dir = parent_dir(&out);
    let _lock = DirLock::acquire(&dir)?;
    write_json(&out, &records)?;
    let mut manifest = Manifest::open_or_new(&dir, ctx.cfg.hash())?;
    manifest.record(&dir, &file_name(&out)?, "report")?;
    manifest.write(&dir)?;
    for r in &records {
        println!(
            "{}  {:>6} -> {:<6}  residual {:.3e}",
            r.image,
            r.input.as_deref().unwrap_or("?"),
            r.analyzer.as_deref().unwrap_or("?"),
            r.fit.residual
        );
    }
    match failed {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn summary_row(r: &ReconstructionResult) -> SummaryRow {
    SummaryRow {
        input: r.input.clone().unwrap_or_else(|| "?".into()),
        fidelity: r.fidelity_vs_ideal,
        purity: r.rho.purity(),
        max_imag: r.rho.max_imag(),
        log_likelihood: r.log_likelihood,
        converged: r.converged,
    }
}

fn rows_for(ds: &TomographyDataset, input: Polarization) -> Result<Vec<CountsImage>> {
    Ok(ds.row_for(input)?.1.to_vec())
}

/// Best result and whether the optimizer converged.
fn reconstruct_input(
    ds: &TomographyDataset,
    input: Polarization,
    opts: &ReconstructOptions,
) -> Result<(ReconstructionResult, Option<Error>)> {
    let images = rows_for(ds, input)?;
    match reconstruct_with(&images, &ds.grid, &ds.profile, opts) {
        Ok(r) => Ok((r, None)),
        Err(Error::ReconstructionNonConvergence { best, grad_norm }) => {
            let r = (*best).clone();
            Ok((
                r,
                Some(Error::ReconstructionNonConvergence { best, grad_norm }),
            ))
        }
        Err(e) => Err(e.into()),
    }
}

fn tag(p: Polarization) -> &'static str {
    match p {
        Polarization::SigmaPlus => "sp",
        Polarization::SigmaMinus => "sm",
        other => other.name(),
    }
}

fn reconstruct(
    ctx: &Context,
    dataset: &Path,
    input: &str,
    basis: &str,
    no_background: bool,
) -> Result<()> {
    let input: Polarization = input.parse()?;
    let basis: Basis = basis.parse()?;
    let ds = load_dataset(dataset)?;
    let opts = ReconstructOptions {
        basis,
        model_background: !no_background,
        ..Default::default()
    };
    let (result, failure) = reconstruct_input(&ds, input, &opts)?;
    let out = ctx.out_file(&format!("rho_{}.json", tag(input)));
    let dir = parent_dir(&out);
    let _lock = DirLock::acquire(&dir)?;
    write_json(&out, &result.to_doc())?;
    let mut manifest = Manifest::open_or_new(&dir, ctx.cfg.hash())?;
    manifest.record(&dir, &file_name(&out)?, "rho")?;
    manifest.write(&dir)?;
    let summary = Summary {
        rows: vec![summary_row(&result)],
    };
    println!(
        "{}",
        serde_json::to_string(&summary).expect("summary serializes")
    );
    print!("{}", summary.table());
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

/// Reads either a reconstruction document or a bare density document.
pub fn load_rho(path: &Path) -> Result<(DensityMatrix, Option<ReconstructionResult>)> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_reader(BufReader::new(f)).map_err(Error::from)?;
    if value.get("rho").is_some() {
        let doc: ReconstructionDoc = serde_json::from_value(value).map_err(Error::from)?;
        let r = ReconstructionResult::from_doc(&doc)?;
        Ok((r.rho.clone(), Some(r)))
    } else {
        let doc: DensityDoc = serde_json::from_value(value).map_err(Error::from)?;
        Ok((DensityMatrix::from_doc(&doc)?, None))
    }
}

fn named_target(name: &str) -> Result<DensityMatrix> {
    let pol = match name.parse::<OutputState>() {
        Ok(s) => s.polarization(),
        Err(_) => name.parse::<Polarization>().map_err(|_| {
            CliError::Usage(format!(
                "unknown target {name:?} (expected J1, J-1, J+, J- or an input polarization)"
            ))
        })?,
    };
    Ok(full_channel(&pol.jones()).to_density())
}

#[derive(Serialize)]
struct FidelityReport {
    rho: String,
    target: String,
    fidelity: f64,
    purity: f64,
    max_imag: f64,
}

fn fidelity_cmd(
    ctx: &Context,
    rho: &Path,
    target: Option<String>,
    target_rho: Option<PathBuf>,
) -> Result<()> {
    let (rho_m, _) = load_rho(rho)?;
    let (target_m, label) = match (target, target_rho) {
        (Some(t), None) => (named_target(&t)?, t),
        (None, Some(p)) => (load_rho(&p)?.0, p.display().to_string()),
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --target or --target-rho".into(),
            ))
        }
    };
    let f = fidelity(&rho_m, &target_m.change_basis(rho_m.basis))?;
    let rep = FidelityReport {
        rho: rho.display().to_string(),
        target: label,
        fidelity: f,
        purity: rho_m.purity(),
        max_imag: rho_m.max_imag(),
    };
    println!("fidelity {f:.9}");
    println!("purity   {:.9}", rep.purity);
    if let Some(out) = &ctx.out {
        let dir = parent_dir(out);
        let _lock = DirLock::acquire(&dir)?;
        write_json(out, &rep)?;
        let mut manifest = Manifest::open_or_new(&dir, ctx.cfg.hash())?;
        manifest.record(&dir, &file_name(out)?, "report")?;
        manifest.write(&dir)?;
    }
    Ok(())
}

fn state_tag(s: OutputState) -> &'static str {
    match s {
        OutputState::J1 => "J1",
        OutputState::JMinus1 => "Jm1",
        OutputState::JPlus => "Jp",
        OutputState::JMinus => "Jm",
    }
}

#[derive(Serialize)]
struct SliceRecord {
    pair: String,
    file: String,
    min: f64,
    max: f64,
    rank1_residual: f64,
    diff_max_abs: Option<f64>,
}

#[derive(Serialize)]
struct WignerReport {
    state: String,
    modes: Vec<String>,
    dim: usize,
    /// Four-mode states are an extension beyond the two-mode slices.
    four_mode: bool,
    origin: f64,
    n_points: usize,
    extent: f64,
    slices: Vec<SliceRecord>,
}

#[allow(clippy::too_many_arguments)]
fn wigner(
    ctx: &Context,
    state: &str,
    rho: Option<&Path>,
    slices: &str,
    points: usize,
    extent: f64,
    modes: &str,
    compare_ideal: bool,
) -> Result<()> {
    let st: OutputState = state.parse()?;
    let ideal = st.ideal();
    let ms = match rho {
        Some(p) => st.mode_state(&load_rho(p)?.0.change_basis(Basis::CircOam))?,
        None => ideal.clone(),
    };
    let pairs: Vec<SlicePair> = if slices == "all" {
        SlicePair::ALL.to_vec()
    } else {
        slices
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<tamq_core::Result<_>>()?
    };
    let pick: Vec<usize> = modes
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--modes expects two indices, got {modes:?}")))?;
    if pick.len() != 2 || pick[0] == pick[1] || pick.iter().any(|&m| m >= ms.dim()) {
        return Err(CliError::Usage(format!(
            "--modes needs two distinct indices below {}",
            ms.dim()
        )));
    }
    let remap = |a: Axis| Axis {
        mode: pick[a.mode],
        ..a
    };

    let dir = ctx.out_dir();
    let _lock = DirLock::acquire(&dir)?;
    let mut manifest = Manifest::open_or_new(&dir, ctx.cfg.hash())?;
    let mut records = Vec::new();
    for pair in pairs {
        let (a, b) = pair.axes();
        let mut slice = wigner_slice_axes(&ms, remap(a), remap(b), points, extent)?;
        slice.pair = pair.id().to_string();
        let stem = format!("{}_{}", state_tag(st), pair.id());
        let csv = format!("{stem}.csv");
        write_slice(&dir.join(&csv), &slice)?;
        manifest.record(&dir, &csv, "slice")?;
        if ctx.emit_png {
            let png = format!("{stem}.png");
            plot::write_png(&dir.join(&png), points, &plot::diverging(&slice.values))?;
            manifest.record(&dir, &png, "plot")?;
        }
        let diff_max_abs = if compare_ideal {
            let mut reference = wigner_slice_axes(&ideal, remap(a), remap(b), points, extent)?;
            reference.pair = slice.pair.clone();
            let d = slice_difference(&slice, &reference)?;
            let mut diff = slice.clone();
            diff.values = d.values;
            let name = format!("{stem}_diff.csv");
            write_slice(&dir.join(&name), &diff)?;
            manifest.record(&dir, &name, "slice")?;
            if ctx.emit_png {
                let png = format!("{stem}_diff.png");
                plot::write_png(&dir.join(&png), points, &plot::diverging(&diff.values))?;
                manifest.record(&dir, &png, "plot")?;
            }
            Some(d.max_abs)
        } else {
            None
        };
        records.push(SliceRecord {
            pair: slice.pair.clone(),
            file: csv,
            min: slice.min(),
            max: slice.max(),
            rank1_residual: slice.rank_residual(1),
            diff_max_abs,
        });
    }
    let origin =
        tamq_core::wigner::wigner_value(&ms, &tamq_core::wigner::PhasePoint::origin(ms.dim()))?;
    let rep = WignerReport {
        state: st.name().to_string(),
        modes: pick.iter().map(|&m| ms.labels[m].clone()).collect(),
        dim: ms.dim(),
        four_mode: ms.dim() == 4,
        origin,
        n_points: points,
        extent,
        slices: records,
    };
    let name = format!("wigner_{}.json", state_tag(st));
    write_json(&dir.join(&name), &rep)?;
    manifest.record(&dir, &name, "report")?;
    manifest.write(&dir)?;
    println!("W(0) = {origin:.12}");
    for r in &rep.slices {
        println!(
            "{:<8} min {:+.6e} max {:+.6e}  -> {}",
            r.pair, r.min, r.max, r.file
        );
    }
    Ok(())
}

fn write_slice(path: &Path, slice: &tamq_core::WignerSlice) -> Result<()> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(f);
    slice.write_csv(&mut w)?;
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Serialize)]
struct SweepInput {
    input: String,
    fidelities: Vec<f64>,
    median: f64,
    min: f64,
    max: f64,
    non_converged: usize,
}

#[derive(Serialize)]
struct SweepReport {
    seeds: Vec<u64>,
    n_frames: u64,
    dark_count_prob: f64,
    inputs: Vec<SweepInput>,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

impl SweepReport {
    fn table(&self) -> String {
        let mut out = format!(
            "{:<8}  {:>9}  {:>9}  {:>9}  {:>13}\n",
            "input", "median", "min", "max", "non-converged"
        );
        out.push_str(&format!("{}\n", "-".repeat(56)));
        for r in &self.inputs {
            out.push_str(&format!(
                "{:<8}  {:>9.6}  {:>9.6}  {:>9.6}  {:>13}\n",
                r.input, r.median, r.min, r.max, r.non_converged
            ));
        }
        out
    }
}

fn report_cmd(ctx: &Context, rho: &[PathBuf], sweep: Option<usize>) -> Result<()> {
    let dir = ctx.out_dir();
    let (json, table, failed) = match (sweep, rho.is_empty()) {
        (Some(n), true) => {
            let n = if n == 0 { ctx.cfg.sweep_seeds } else { n };
            let opts = ReconstructOptions::default();
            let mut per_input: Vec<(Vec<f64>, usize)> = vec![(Vec::new(), 0); ctx.cfg.inputs.len()];
            let mut seeds = Vec::new();
            let mut failed = None;
            for k in 0..n {
                let spec = ctx.cfg.dataset_spec(k);
                seeds.push(spec.seed);
                let ds = synthesize_dataset(&spec)?;
                for (i, &input) in ds.inputs.iter().enumerate() {
                    let (r, fail) = reconstruct_input(&ds, input, &opts)?;
                    per_input[i].0.push(r.fidelity_vs_ideal.unwrap_or(f64::NAN));
                    if fail.is_some() {
                        per_input[i].1 += 1;
                        failed = failed.or(fail);
                    }
                }
            }
            let inputs = ctx
                .cfg
                .inputs
                .iter()
                .zip(per_input)
                .map(|(p, (f, nc))| SweepInput {
                    input: p.name().to_string(),
                    median: median(&f),
                    min: f.iter().cloned().fold(f64::INFINITY, f64::min),
                    max: f.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    fidelities: f,
                    non_converged: nc,
                })
                .collect();
            let rep = SweepReport {
                seeds,
                n_frames: ctx.cfg.n_frames,
                dark_count_prob: ctx.cfg.noise.dark_count_prob,
                inputs,
            };
            let table = rep.table();
            (
                serde_json::to_value(&rep).expect("report serializes"),
                table,
                failed,
            )
        }
        (None, false) => {
            let results = rho
                .iter()
                .map(|p| match load_rho(p)? {
                    (_, Some(r)) => Ok(r),
                    (_, None) => Err(CliError::Usage(format!(
                        "{} is not a reconstruction document",
                        p.display()
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            let summary = report(&results)?;
            let table = summary.table();
            (
                serde_json::to_value(&summary).expect("summary serializes"),
                table,
                None,
            )
        }
        _ => {
            return Err(CliError::Usage(
                "report takes either --rho files or --sweep".into(),
            ))
        }
    };
    let _lock = DirLock::acquire(&dir)?;
    write_json(&dir.join("report.json"), &json)?;
    fs::write(dir.join("report.txt"), &table)
        .map_err(|e| CliError::io(dir.join("report.txt"), e))?;
    let mut manifest = Manifest::open_or_new(&dir, ctx.cfg.hash())?;
    manifest.record(&dir, "report.json", "report")?;
    manifest.record(&dir, "report.txt", "report")?;
    manifest.write(&dir)?;
    print!("{table}");
    match failed {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn verify(dir: PathBuf) -> Result<()> {
    let manifest = Manifest::read(&dir)?;
    let problems = manifest.check(&dir);
    if problems.is_empty() {
        println!(
            "ok: {} files match {}",
            manifest.files.len(),
            dir.join(crate::manifest::MANIFEST).display()
        );
        Ok(())
    } else {
        Err(CliError::Verify(problems.join("; ")))
    }
}
