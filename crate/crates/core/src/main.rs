use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use dtsnn::codec::{format_text, write_dts, WordWidth};
use dtsnn::dataset::{load_idx, LabeledImageSet, DEFAULT_THETA};
use dtsnn::netspec::NetSpecFile;
use dtsnn::network::{evaluate, present_input, NetSpec};
use dtsnn::oracle::fuzz::{verify, FuzzConfig};
use dtsnn::quant::{sweep, write_sweep_csv};

#[derive(Parser)]
#[command(name = "dtsnn", version, about = "Differential-time spiking network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct DataArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Only use the first N images.
    #[arg(long)]
    limit: Option<usize>,
    /// Level-crossing threshold for pixel encoding.
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
}

impl DataArgs {
    fn load(&self) -> Result<LabeledImageSet> {
        let mut set =
            load_idx(&self.images, &self.labels).with_context(|| format!("loading {}", self.images.display()))?;
        if let Some(limit) = self.limit {
            set.truncate(limit);
        }
        Ok(set)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Encode images into DTS1 stream blocks, one block per image.
    Encode {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 28)]
        reps: u32,
        #[arg(long, default_value_t = 8)]
        width: u32,
        #[arg(long)]
        out: PathBuf,
        /// Write the text debug format instead of binary.
        #[arg(long)]
        text: bool,
    },
    /// Classify images and write a per-image report.
    Infer {
        #[arg(long)]
        net: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        reps: Option<u32>,
        /// Quantize float weights at this bit width.
        #[arg(long)]
        bits: Option<u32>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Quantize a float netspec into an integer one.
    Quantize {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        bits: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy for each quantization bit width.
    Sweep {
        #[arg(long)]
        net: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',', default_value = "4,5,6,7,8,9")]
        bits: Vec<u32>,
        #[arg(long)]
        reps: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fuzz the event engine against the dense oracle.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        trials: u64,
        #[arg(long, default_value_t = 20)]
        max_inputs: usize,
        #[arg(long, default_value_t = 10)]
        max_neurons: usize,
        #[arg(long, value_delimiter = ',', default_value = "4,8")]
        widths: Vec<u32>,
    },
    /// Average processing-cycle estimate per image.
    Cycles {
        #[arg(long)]
        net: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        reps: Option<u32>,
        #[arg(long)]
        bits: Option<u32>,
        /// Print the estimate of every image.
        #[arg(long)]
        per_image: bool,
    },
}

fn load_net(path: &Path, bits: Option<u32>, reps: Option<u32>) -> Result<NetSpec> {
    let file = NetSpecFile::load(path)?;
    let mut net = match bits {
        Some(bits) if file.has_float_weights() => file.to_netspec(Some(bits))?,
        Some(_) if file.has_integer_weights() => {
            bail!("--bits given but {} has no float weights to quantize", path.display())
        }
        _ => file.to_netspec(bits)?,
    };
    if let Some(reps) = reps {
        if reps == 0 {
            bail!("--reps must be at least 1");
        }
        net.repetitions = reps;
    }
    Ok(net)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn check_inputs(net: &NetSpec, set: &LabeledImageSet) -> Result<()> {
    if set.rows * set.cols != net.n_inputs() {
        bail!(
            "images have {} pixels but the network expects {} inputs",
            set.rows * set.cols,
            net.n_inputs()
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Encode {
            data,
            reps,
            width,
            out,
            text,
        } => {
            let set = data.load()?;
            let width = WordWidth::new(width)?;
            let mut writer = create(&out)?;
            let mut words = 0usize;
            for (amplitudes, _) in set.encode(data.theta)? {
                let streams = present_input(&amplitudes, reps, width)?;
                words += streams.iter().map(|s| s.len()).sum::<usize>();
                if text {
                    writer.write_all(format_text(&streams).as_bytes())?;
                } else {
                    write_dts(&mut writer, &streams)?;
                }
            }
            writer.flush()?;
            println!("encoded {} images, {} words, width {}", set.len(), words, width);
        }
        Command::Infer {
            net,
            data,
            reps,
            bits,
            report,
        } => {
            let net = load_net(&net, bits, reps)?;
            let set = data.load()?;
            check_inputs(&net, &set)?;
            let eval = evaluate(&net, &set.encode(data.theta)?)?;
            let mut writer = create(&report)?;
            writeln!(writer, "index,label,predicted,correct,events,cycles")?;
            for o in &eval.outcomes {
                writeln!(
                    writer,
                    "{},{},{},{},{},{}",
                    o.index,
                    o.label,
                    o.predicted,
                    u8::from(o.correct()),
                    o.events,
                    o.cycles
                )?;
            }
            writer.flush()?;
            println!(
                "accuracy {:.4} ({} of {} correct)",
                eval.accuracy(),
                eval.images() - eval.errors(),
                eval.images()
            );
        }
        Command::Quantize { net, bits, out } => {
            let file = NetSpecFile::load(&net)?;
            let float = file.to_float_netspec()?;
            let quantized = dtsnn::quant::quantize_net(&float, bits)?;
            let mut out_file = NetSpecFile::from_netspec(&quantized);
            out_file.metadata = file.metadata.clone();
            out_file.save(&out)?;
            let scales: Vec<String> = quantized.layers.iter().map(|l| l.weight_scale.to_string()).collect();
            println!("quantized to {} bits, layer scales {}", bits, scales.join(","));
        }
        Command::Sweep {
            net,
            data,
            bits,
            reps,
            out,
        } => {
            let file = NetSpecFile::load(&net)?;
            let mut float = file.to_float_netspec()?;
            if let Some(reps) = reps {
                float.repetitions = reps;
            }
            let set = data.load()?;
            if set.rows * set.cols != float.layers[0].n_inputs {
                bail!("image size does not match the network input count");
            }
            let rows = sweep(&float, &set.encode(data.theta)?, &bits)?;
            write_sweep_csv(create(&out)?, &rows)?;
            for row in &rows {
                println!(
                    "{} bits: accuracy {:.4} ({} errors / {})",
                    row.bits, row.accuracy, row.errors, row.images
                );
            }
        }
        Command::Verify {
            seed,
            trials,
            max_inputs,
            max_neurons,
            widths,
        } => {
            for &w in &widths {
                WordWidth::new(w)?;
            }
            let defaults = FuzzConfig::default();
            let cfg = FuzzConfig {
                max_inputs: max_inputs.max(defaults.min_inputs),
                max_neurons: max_neurons.max(defaults.min_neurons),
                widths,
                ..defaults
            };
            let report = verify(seed, trials, &cfg)?;
            for failure in &report.failures {
                println!("trial {}: {}", failure.trial, failure.report);
            }
            if !report.passed() {
                eprintln!("error: {} of {} trials diverged", report.failures.len(), report.trials);
                return Ok(ExitCode::from(2));
            }
            println!(
                "equivalent: {} trials, {} input spikes, seed {}",
                report.trials, report.input_spikes, seed
            );
        }
        Command::Cycles {
            net,
            data,
            reps,
            bits,
            per_image,
        } => {
            let net = load_net(&net, bits, reps)?;
            let set = data.load()?;
            check_inputs(&net, &set)?;
            let eval = evaluate(&net, &set.encode(data.theta)?)?;
            if per_image {
                println!("index,cycles,events");
                for o in &eval.outcomes {
                    println!("{},{},{}", o.index, o.cycles, o.events);
                }
            }
            let min = eval.outcomes.iter().map(|o| o.cycles).min().unwrap_or(0);
            let max = eval.outcomes.iter().map(|o| o.cycles).max().unwrap_or(0);
            println!(
                "average cycles per image {:.1} over {} images (min {}, max {})",
                eval.mean_cycles(),
                eval.images(),
                min,
                max
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
