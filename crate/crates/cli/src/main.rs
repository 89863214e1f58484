use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use asm2cpld_core::device::{format_decimal, parse_decimal, DeviceParams};
use asm2cpld_core::driver::{self, CompileOptions, DriverError, VerifyOptions};
use asm2cpld_core::rewriter::HwImageManifest;
use asm2cpld_core::selector::ProfileMap;

const EXIT_INPUT: u8 = 1;
const EXIT_NOTHING_SELECTED: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "asm2cpld", version, about = "MIPS-2 segments to XPLA2 CPLD functional units")]
struct Cli {
    /// Device parameter file (key=value); overrides $ASM2CPLD_DEVICE.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for generated files.
    #[arg(short = 'o', long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate one straight-line segment to PHDL.
    Translate { input: PathBuf },
    /// Synthesize a PHDL file and write its netlist and fit report.
    Synth {
        input: PathBuf,
        /// Keep one macrocell per intermediate node bit.
        #[arg(long)]
        no_collapse: bool,
    },
    /// Select, synthesize and replace segments of a program.
    Compile(CompileArgs),
    /// Check a manifest's netlists and rewrite against the original program.
    Verify {
        program: PathBuf,
        manifest: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
    },
}

#[derive(Args)]
struct CompileArgs {
    input: PathBuf,
    /// Block execution counts: `label count` or `@index count` per line.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Latency budget in ns (default one 85 MHz period).
    #[arg(long)]
    budget_ns: Option<String>,
    #[arg(long)]
    max_accept: Option<usize>,
    /// Accept segments needing up to this many clock periods.
    #[arg(long)]
    max_cycles: Option<u32>,
    /// Skip the liveness check on registers the rewrite stops writing.
    #[arg(long)]
    trust_liveout: bool,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn device_params(config: Option<&Path>) -> Result<DeviceParams> {
    let mut p = DeviceParams::default();
    if let Ok(env) = std::env::var("ASM2CPLD_DEVICE") {
        let path = PathBuf::from(env);
        p.apply_config(&read(&path)?).with_context(|| format!("{}", path.display()))?;
    }
    if let Some(path) = config {
        p.apply_config(&read(path)?).with_context(|| format!("{}", path.display()))?;
    }
    Ok(p)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "out".to_string(), |s| s.to_string_lossy().into_owned())
}

fn run(cli: Cli) -> Result<u8> {
    let mut opts = CompileOptions { device: device_params(cli.config.as_deref())?, ..Default::default() };
    let name = |p: &Path| p.display().to_string();
    match cli.command {
        Command::Translate { input } => {
            let (_, artifact) = driver::translate_segment(&name(&input), &read(&input)?)?;
            driver::write_artifacts(&cli.out_dir, std::slice::from_ref(&artifact))?;
            println!("wrote {}", cli.out_dir.join(&artifact.name).display());
        }
        Command::Synth { input, no_collapse } => {
            opts.synth.collapse_nodes = !no_collapse;
            let (_, report, files) = driver::synth_phdl(&name(&input), &read(&input)?, &opts)?;
            driver::write_artifacts(&cli.out_dir, &files)?;
            println!(
                "{}: macrocells={} levels={} latency_ns={} fits={}",
                report.name,
                report.macrocells_used,
                report.levels,
                format_decimal(report.latency_ns),
                report.fits
            );
        }
        Command::Compile(args) => {
            if let Some(p) = &args.profile {
                opts.profile = ProfileMap::parse(&read(p)?).with_context(|| name(p))?;
            }
            if let Some(b) = &args.budget_ns {
                opts.budget.latency_budget_ns = parse_decimal(b).ok_or_else(|| anyhow!("--budget-ns: bad value `{b}`"))?;
            }
            opts.budget.max_accept = args.max_accept;
            opts.budget.max_cycles = args.max_cycles;
            opts.budget.trust_liveout = args.trust_liveout;
            let out = driver::compile(&name(&args.input), &read(&args.input)?, &file_stem(&args.input), &opts)?;
            driver::write_artifacts(&cli.out_dir, &out.artifacts)?;
            print!("{}", out.summary);
            println!("accepted {} of {} candidates; register pressure delta {}", out.accepted.len(), out.verdicts.len(), out.register_pressure_delta());
            if out.accepted.is_empty() {
                return Ok(EXIT_NOTHING_SELECTED);
            }
        }
        Command::Verify { program, manifest, trials, seed } => {
            let text = read(&manifest)?;
            let m = HwImageManifest::parse(&text).with_context(|| name(&manifest))?;
            let dir = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
            let load = |f: &str| {
                let p = dir.join(f);
                fs::read_to_string(&p).map_err(|source| DriverError::Io { path: p.display().to_string(), source })
            };
            let vopts = VerifyOptions { trials, seed, ..Default::default() };
            let r = driver::verify_manifest(&name(&program), &read(&program)?, &m, load, &vopts)?;
            println!(
                "PASS: {} slot(s), {} random/corner vectors, {} exhaustive narrow vectors, {} program trials",
                r.slots, r.vectors_checked, r.narrow_vectors, r.program_trials
            );
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let verify_failed = e.downcast_ref::<DriverError>().is_some_and(DriverError::is_verification_failure);
            ExitCode::from(if verify_failed { EXIT_VERIFY } else { EXIT_INPUT })
        }
    }
}
