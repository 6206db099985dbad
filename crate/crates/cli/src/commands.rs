use std::fs;
use std::io::{BufWriter, Write};

use anyhow::{bail, Context, Result};
use ssct::export::write_pgm16;
use ssct::pipeline::{self, DecomposeConfig, Estimation};
use ssct::signal::{read_field, write_field};
use ssct::synth::{Preset, Synthetic};
use ssct::tiling::build_tiling;
use ssct::transform::{forward as forward_transform, frame_energy};
use ssct::{SpatialField, SsctError, VectorField2};

use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::Analysis;

struct Input {
    field: SpatialField,
    preset: Option<Preset>,
    synthetic: Option<Synthetic>,
}

fn load_input(cfg: &RunConfig) -> Result<Input> {
    if let Some(p) = cfg.load_preset()? {
        let syn = p.generate()?;
        return Ok(Input {
            field: syn.field.clone(),
            preset: Some(p),
            synthetic: Some(syn),
        });
    }
    let Some(path) = &cfg.input else {
        bail!(SsctError::Config(
            "no input: give --preset or --input".into()
        ));
    };
    let field = read_field(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Input {
        field,
        preset: None,
        synthetic: None,
    })
}

fn resolve(cfg: &RunConfig, a: &Analysis, side: usize) -> Result<DecomposeConfig> {
    let mut d = cfg.analysis(side)?;
    if a.wave_packet {
        d.tiling.s = 0.625;
        d.tiling.t = 0.625;
    }
    if a.real {
        d.tiling.real_mode = true;
    }
    if let Some(e) = a.epsilon {
        d.epsilon = e;
    }
    if let Some(delta) = a.delta {
        d.mass_threshold = delta;
    }
    if a.lb.is_some() {
        d.lb = a.lb;
    }
    d.validate()?;
    Ok(d)
}

fn effective_lb(d: &DecomposeConfig) -> Result<usize> {
    let tiling = build_tiling(&d.tiling)?;
    Ok(d.lb.unwrap_or_else(|| tiling.default_position_grid()))
}

/// Truth from the config file, else from the preset's first component.
fn load_truth(cfg: &RunConfig, input: &Input, lb: usize) -> Result<Option<VectorField2>> {
    if let Some(path) = &cfg.truth {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(Some(VectorField2::read_csv(&text, lb)?));
    }
    Ok(input.preset.as_ref().and_then(|p| p.ground_truth(0, lb)))
}

fn record_config(m: &mut Manifest, cfg: &RunConfig, d: Option<&DecomposeConfig>) -> Result<()> {
    let mut c = cfg.clone();
    c.decompose = d.cloned();
    c.out = None;
    m.set("config", serde_json::to_string(&c)?);
    Ok(())
}

fn write_csv(
    m: &mut Manifest,
    name: &str,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> ssct::Result<()>,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(m.path(name))?);
    body(&mut w)?;
    w.flush()?;
    m.output(name)
}

fn write_raw(m: &mut Manifest, name: &str, f: &SpatialField) -> Result<()> {
    write_field(f, m.path(name))?;
    m.output(name)
}

fn write_map(m: &mut Manifest, name: &str, values: &[f64], side: usize) -> Result<()> {
    write_pgm16(&m.path(name), values, side, side)?;
    m.output(name)?;
    m.output(&format!("{name}.scale.txt"))
}

fn real_part(f: &SpatialField) -> Vec<f64> {
    f.values().iter().map(|v| v.re).collect()
}

pub fn synth(cfg: RunConfig, quiet: bool) -> Result<()> {
    if cfg.preset.is_none() {
        bail!(SsctError::Config("synth needs --preset".into()));
    }
    let input = load_input(&cfg)?;
    let (preset, syn) = (
        input.preset.as_ref().unwrap(),
        input.synthetic.as_ref().unwrap(),
    );
    let mut m = Manifest::new(&cfg.out_dir(), "synth")?;
    record_config(&mut m, &cfg, None)?;
    m.set("preset", &preset.name);
    m.set("side", preset.side);
    m.set("seed", preset.seed);
    m.set("components", syn.components.len());
    write_raw(&mut m, "field.ssct", &syn.field)?;
    write_raw(&mut m, "clean.ssct", &syn.clean)?;
    write_map(&mut m, "field.pgm", &real_part(&syn.field), preset.side)?;
    // Truth on the default curvelet position grid.
    let lb = effective_lb(&DecomposeConfig::new(preset.side))?;
    m.set("truth_lb", lb);
    for (k, c) in syn.components.iter().enumerate() {
        write_raw(&mut m, &format!("component_{:02}.ssct", k + 1), c)?;
        if let Some(t) = preset.ground_truth(k, lb) {
            write_csv(&mut m, &format!("truth_{:02}.csv", k + 1), |w| {
                t.write_csv(w)
            })?;
        }
    }
    m.stage("synth");
    if !quiet {
        println!(
            "wrote {} ({} components, side {})",
            m.dir().display(),
            syn.components.len(),
            preset.side
        );
    }
    m.finish()
}

pub fn forward(cfg: RunConfig, a: &Analysis, quiet: bool) -> Result<()> {
    let input = load_input(&cfg)?;
    let d = resolve(&cfg, a, input.field.side())?;
    let mut m = Manifest::new(&cfg.out_dir(), "forward")?;
    record_config(&mut m, &cfg, Some(&d))?;
    let tiling = build_tiling(&d.tiling)?;
    let coeffs = forward_transform(&input.field, &tiling, d.lb)?;
    m.stage("forward");
    let energy = input.field.energy();
    let frame = frame_energy(&coeffs);
    let deviation = if energy > 0.0 {
        (frame - energy).abs() / energy
    } else {
        frame
    };
    m.set("tiles", tiling.tile_count());
    m.set("lb", coeffs.lb());
    m.set("signal_energy", energy);
    m.set("frame_energy", frame);
    m.set("energy_deviation", deviation);
    write_csv(&mut m, "tiling.csv", |w| tiling.write_summary_csv(w))?;
    write_csv(&mut m, "coefficients.bin", |w| coeffs.write_dump(w))?;
    if !quiet {
        println!(
            "tiles={} lb={} energy_deviation={deviation:.3e}",
            tiling.tile_count(),
            coeffs.lb()
        );
    }
    m.finish()
}

fn estimation_outputs(m: &mut Manifest, est: &Estimation, prefix: &str) -> Result<()> {
    let lb = est.lb;
    write_csv(m, &format!("{prefix}mean.csv"), |w| est.mean.write_csv(w))?;
    write_csv(m, &format!("{prefix}squeeze.csv"), |w| {
        est.squeeze.write_csv(w)
    })?;
    write_map(m, &format!("{prefix}mass.pgm"), &est.squeeze.mass_map(), lb)?;
    if let Some(e) = &est.errors {
        write_csv(m, &format!("{prefix}error.csv"), |w| e.write_csv(w))?;
        write_map(m, &format!("{prefix}error.pgm"), e.values(), lb)?;
    }
    Ok(())
}

/// `R0` when the threshold is zero, `Rdelta` otherwise.
fn error_key(d: &DecomposeConfig) -> &'static str {
    if d.mass_threshold == 0.0 {
        "R0"
    } else {
        "Rdelta"
    }
}

pub fn estimate(cfg: RunConfig, a: &Analysis, quiet: bool) -> Result<()> {
    let input = load_input(&cfg)?;
    let d = resolve(&cfg, a, input.field.side())?;
    let lb = effective_lb(&d)?;
    let truth = load_truth(&cfg, &input, lb)?;
    let mut m = Manifest::new(&cfg.out_dir(), "estimate")?;
    record_config(&mut m, &cfg, Some(&d))?;
    let est = pipeline::estimate_field(&input.field, &d, truth.as_ref())?;
    m.stage("estimate");
    m.set("lb", est.lb);
    m.set("estimates", est.estimate_count);
    m.set("support", est.support_count());
    m.set("defined", est.mean.defined());
    m.set("squeezed_mass", est.squeeze.total_mass());
    estimation_outputs(&mut m, &est, "")?;
    let key = error_key(&d);
    let summary = match &est.errors {
        Some(e) => {
            m.set(&format!("max_{key}"), e.max);
            m.set(&format!("mean_{key}"), e.mean);
            m.set("evaluated", e.count);
            format!(
                "max_{key}={:.6} mean_{key}={:.6} evaluated={}",
                e.max, e.mean, e.count
            )
        }
        None => format!("defined={} (no ground truth)", est.mean.defined()),
    };
    if !quiet {
        println!("{summary}");
    }
    m.finish()
}

pub fn decompose(
    cfg: RunConfig,
    a: &Analysis,
    max_modes: Option<usize>,
    quiet: bool,
) -> Result<()> {
    let input = load_input(&cfg)?;
    let mut d = resolve(&cfg, a, input.field.side())?;
    if max_modes.is_some() {
        d.max_modes = max_modes;
        d.validate()?;
    }
    let mut m = Manifest::new(&cfg.out_dir(), "decompose")?;
    record_config(&mut m, &cfg, Some(&d))?;
    let set = pipeline::decompose(&input.field, &d)?;
    m.stage("decompose");
    let side = input.field.side();
    m.set("modes", set.modes.len());
    m.set("clusters", set.cluster_count);
    m.set("status", format!("{:?}", set.status));
    m.set("cover_error", set.cover_error);
    let mut report = String::from(
        "mode,total_mass,centroid_a,centroid_theta,point_count,coefficients,coefficient_energy\n",
    );
    for (k, mode) in set.modes.iter().enumerate() {
        let name = format!("mode_{:03}", k + 1);
        write_raw(&mut m, &format!("{name}.ssct"), &mode.field)?;
        write_map(
            &mut m,
            &format!("{name}.pgm"),
            &real_part(&mode.field),
            side,
        )?;
        let c = &mode.cluster;
        report.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{},{},{:.16e}\n",
            k + 1,
            c.total_mass,
            c.centroid_a,
            c.centroid_theta,
            c.point_count,
            mode.coefficient_count,
            mode.coefficient_energy
        ));
        if let Some(syn) = &input.synthetic {
            let best = syn
                .components
                .iter()
                .map(|comp| mode.field.relative_error(comp))
                .collect::<ssct::Result<Vec<f64>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            m.set(&format!("{name}_best_component_error"), best);
        }
    }
    fs::write(m.path("modes.csv"), report)?;
    m.output("modes.csv")?;
    write_raw(&mut m, "residual.ssct", &set.residual)?;
    write_raw(&mut m, "lowpass.ssct", &set.lowpass)?;
    write_raw(&mut m, "discarded.ssct", &set.discarded)?;
    if !quiet {
        println!(
            "modes={} clusters={} cover_error={:.3e}",
            set.modes.len(),
            set.cluster_count,
            set.cover_error
        );
    }
    m.finish()
}

pub fn bench(cfg: RunConfig, a: &Analysis, quiet: bool) -> Result<()> {
    let input = load_input(&cfg)?;
    let side = input.field.side();
    let base = resolve(&cfg, a, side)?;
    let mut m = Manifest::new(&cfg.out_dir(), "bench")?;
    record_config(&mut m, &cfg, Some(&base))?;
    let mut table = String::from("transform,s,t,lb,max_error,mean_error,evaluated\n");
    let mut lines = Vec::new();
    for (name, s, t) in [("ssct", 0.625, 0.875), ("sswpt", 0.625, 0.625)] {
        let mut d = base.clone();
        d.tiling.s = s;
        d.tiling.t = t;
        let lb = effective_lb(&d)?;
        let Some(truth) = load_truth(&cfg, &input, lb)? else {
            bail!(SsctError::Config(
                "bench needs a ground truth: a preset or --truth".into()
            ));
        };
        let est = pipeline::estimate_field(&input.field, &d, Some(&truth))?;
        m.stage(name);
        let e = est.errors.as_ref().unwrap();
        table.push_str(&format!(
            "{name},{s},{t},{lb},{:.16e},{:.16e},{}\n",
            e.max, e.mean, e.count
        ));
        m.set(&format!("{name}_max_error"), e.max);
        m.set(&format!("{name}_mean_error"), e.mean);
        write_map(&mut m, &format!("{name}_error.pgm"), e.values(), lb)?;
        lines.push(format!(
            "{name:<6} s={s:<5} t={t:<5} max={:.4} mean={:.4} evaluated={}",
            e.max, e.mean, e.count
        ));
    }
    fs::write(m.path("bench.csv"), table)?;
    m.output("bench.csv")?;
    if !quiet {
        for l in lines {
            println!("{l}");
        }
    }
    m.finish()
}

pub fn snr_sweep(cfg: RunConfig, quiet: bool) -> Result<()> {
    let Some(preset) = cfg.load_preset()? else {
        bail!(SsctError::Config("snr-sweep needs --preset".into()));
    };
    let sweep = cfg.sweep.clone().unwrap_or_default();
    let d = cfg.analysis(preset.side)?;
    let mut m = Manifest::new(&cfg.out_dir(), "snr-sweep")?;
    record_config(&mut m, &cfg, Some(&d))?;
    let snr: Vec<f64> = sweep
        .snr_db
        .iter()
        .map(|s| s.unwrap_or(f64::INFINITY))
        .collect();
    let rows = pipeline::snr_sweep(&preset, &snr, &sweep.delta, &sweep.seeds, &d)?;
    m.stage("sweep");
    let mut table = String::from("snr_db,delta,seed,max_error,mean_error,evaluated\n");
    for r in &rows {
        table.push_str(&format!(
            "{},{},{},{:.16e},{:.16e},{}\n",
            r.snr_db, r.mass_threshold, r.seed, r.max_error, r.mean_error, r.evaluated
        ));
        if !quiet {
            println!(
                "snr={:<5} delta={:<4} seed={:<3} max={:.4} mean={:.4} evaluated={}",
                r.snr_db, r.mass_threshold, r.seed, r.max_error, r.mean_error, r.evaluated
            );
        }
    }
    fs::write(m.path("sweep.csv"), table)?;
    m.output("sweep.csv")?;
    m.set("rows", rows.len());
    m.finish()
}
