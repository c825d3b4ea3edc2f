//! `radhar` command-line front-end.
//!
//! Exit codes: 0 success, 2 invalid configuration or usage, 3 failure
//! while running (the failing stage is named on stderr).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use radhar::config::RunConfig;
use radhar::io::{self, AxisDescriptor, SidecarMeta, Tensor};
use radhar::pipeline::{self, Manifest};
use radhar::synth::{simulate_dynamic_scene, simulate_static_frames, synth_blob_sequence};
use radhar::{render, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "radhar", version, about = "Radar HAR preprocessing: denoising, metrics, RA-map scoring and tracking")]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true, env = "RADHAR_CONFIG")]
    config: Option<PathBuf>,

    /// Run seed (overrides the config's `seed`).
    #[arg(long, global = true, env = "RADHAR_SEED")]
    seed: Option<u64>,

    /// Output directory (overrides the config's `output_dir`; default `radhar-out`).
    #[arg(long, global = true, env = "RADHAR_OUT")]
    out: Option<PathBuf>,

    /// Worker threads (overrides the config's `jobs`; default all cores).
    #[arg(long, global = true, env = "RADHAR_JOBS")]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic data as RDT1 tensors.
    Synth {
        #[arg(long, value_enum, default_value_t = SynthKind::Dynamic)]
        kind: SynthKind,
    },
    /// Noise sweep × denoising methods, scored against the clean spectrogram.
    DynamicEval,
    /// RA frames -> cleanliness scores -> tracking -> masks and overlays.
    StaticEval,
    /// Score RA frames stored in a tensor (frame × range × angle).
    Score {
        #[arg(long)]
        input: PathBuf,
    },
    /// Track lumps through RA frames stored in a tensor and write masks.
    Track {
        #[arg(long)]
        input: PathBuf,
    },
    /// Render each frame of a real tensor as a PGM.
    Render {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SynthKind {
    /// Slow-time signal, IQ cube and Doppler truth of the dynamic scene.
    Dynamic,
    /// Blob-field RA frames and primary trajectory.
    Blobs,
    /// Multi-channel IQ cubes of a static scene.
    Static,
}

fn load_config(g: &Global) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(j) = g.jobs {
        cfg.jobs = Some(j);
    }
    cfg.validate()?;
    let out = g
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("radhar-out"));
    Ok((cfg, out))
}

fn synth(kind: SynthKind, cfg: &RunConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let params = serde_json::to_value(cfg)?;
    match kind {
        SynthKind::Dynamic => {
            let spec = cfg.dynamic_scene()?;
            let scene = simulate_dynamic_scene(&spec)?;
            let slow = Tensor::from_complex(vec![scene.slow_time.len()], scene.slow_time.samples().iter().copied())?;
            let p = out.join("slow_time.rdt");
            io::write_tensor(&p, &slow)?;
            io::write_sidecar(
                &p,
                &SidecarMeta::new("synth-dynamic", params.clone(), vec![spec.rng_seed], vec![AxisDescriptor::index("chirp")]),
            )?;
            let (ch, k, n) = scene.cube.data().dim();
            let cube = Tensor::from_complex(vec![ch, k, n], scene.cube.data().iter().copied())?;
            let p = out.join("cube.rdt");
            io::write_tensor(&p, &cube)?;
            io::write_sidecar(
                &p,
                &SidecarMeta::new(
                    "synth-dynamic",
                    params,
                    vec![spec.rng_seed],
                    vec![AxisDescriptor::index("channel"), AxisDescriptor::index("chirp"), AxisDescriptor::index("sample")],
                ),
            )?;
            let rows: Vec<Vec<f64>> = (0..spec.chirps)
                .map(|c| scene.doppler_truth_hz.iter().map(|s| s[c]).collect())
                .collect();
            let mut csv = String::from("chirp");
            for s in 0..scene.doppler_truth_hz.len() {
                csv.push_str(&format!(",scatterer_{s}_hz"));
            }
            csv.push('\n');
            for (c, r) in rows.iter().enumerate() {
                csv.push_str(&c.to_string());
                for v in r {
                    csv.push_str(&format!(",{v}"));
                }
                csv.push('\n');
            }
            io::atomic_write(&out.join("doppler_truth.csv"), csv.as_bytes())?;
        }
        SynthKind::Blobs => {
            let spec = cfg
                .blob_spec()?
                .ok_or_else(|| Error::Config("static.source is not a blob field".into()))?;
            let seq = synth_blob_sequence(&spec)?;
            let frames: Vec<_> = seq.frames.iter().map(|f| f.power.clone()).collect();
            let p = out.join("ra_frames.rdt");
            io::write_tensor(&p, &pipeline::stack(&frames)?)?;
            io::write_sidecar(
                &p,
                &SidecarMeta::new(
                    "synth-blobs",
                    params,
                    vec![spec.rng_seed],
                    vec![AxisDescriptor::index("frame"), AxisDescriptor::index("row"), AxisDescriptor::index("col")],
                ),
            )?;
            let mut csv = String::from("frame,row,col\n");
            for (t, (r, c)) in seq.truth.iter().enumerate() {
                csv.push_str(&format!("{t},{r},{c}\n"));
            }
            io::atomic_write(&out.join("truth.csv"), csv.as_bytes())?;
        }
        SynthKind::Static => {
            let (spec, n) = cfg
                .static_scene()?
                .ok_or_else(|| Error::Config("static.source is not a scene".into()))?;
            let cubes = simulate_static_frames(&spec, n)?;
            for (t, cube) in cubes.iter().enumerate() {
                let (ch, k, s) = cube.data().dim();
                let p = out.join(format!("cube_{t:03}.rdt"));
                io::write_tensor(&p, &Tensor::from_complex(vec![ch, k, s], cube.data().iter().copied())?)?;
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let (cfg, out) = load_config(&cli.global)?;
    match cli.command {
        Command::Synth { kind } => synth(kind, &cfg, &out),
        Command::DynamicEval => {
            let r = pipeline::cmd_dynamic_eval(&cfg, &out)?;
            print!("{}", r.table(&cfg.dynamic.methods));
            Ok(())
        }
        Command::StaticEval => {
            let r = pipeline::cmd_static_eval(&cfg, &out)?;
            let accepted = r.track.iter().filter(|s| s.accepted_by_score()).count();
            let coasting = r.track.iter().filter(|s| s.coasting()).count();
            println!(
                "{} frames: {accepted} accepted by score, {coasting} coasting; outputs in {}",
                r.track.len(),
                out.display()
            );
            Ok(())
        }
        Command::Score { input } => {
            let frames = pipeline::frames_from_tensor(&io::read_tensor(&input)?)?;
            std::fs::create_dir_all(&out)?;
            let scores = pipeline::with_pool(cfg.jobs, || pipeline::score_frames(&frames, &cfg.static_eval.score))??;
            pipeline::write_scores(&out.join("scores.csv"), &scores)
        }
        Command::Track { input } => {
            let frames = pipeline::frames_from_tensor(&io::read_tensor(&input)?)?;
            let mut manifest = Manifest::create(&out)?;
            let r = pipeline::with_pool(cfg.jobs, || pipeline::run_static_on(frames, None, &cfg))??;
            pipeline::write_static_outputs(&r, &cfg, &out, &mut manifest)
        }
        Command::Render { input } => {
            let t = io::read_tensor(&input)?;
            std::fs::create_dir_all(&out)?;
            let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("tensor");
            for (i, f) in pipeline::frames_from_tensor(&t)?.iter().enumerate() {
                io::write_pgm(&out.join(format!("{stem}_{i:03}.pgm")), &render::frame_to_gray(f))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_config() => {
            eprintln!("radhar: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("radhar: {e}");
            ExitCode::from(3)
        }
    }
}
