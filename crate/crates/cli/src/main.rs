use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nphoton::check_validity;
use nphoton::kernels::SamplingReport;
use nphoton::scenarios::pipeline::sampling_reports;

mod bundle;
mod oracle;
mod scene;

use scene::Scene;

const EXIT_ERROR: u8 = 1;
const EXIT_WARNINGS: u8 = 2;

#[derive(Parser)]
#[command(
    name = "nphoton",
    version,
    about = "Propagate N-photon amplitudes through optical scenes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scene file or builtin scene and write CSV tables plus metadata.json.
    Run {
        /// Scene JSON path or builtin name (example1-default, example2-default, ...).
        scene: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Exit with status 2 when validity or sampling warnings occur.
        #[arg(long)]
        strict: bool,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print validity ratios and the sampling status of every kernel.
    Validate { scene: String },
    /// Evaluate a closed-form oracle, e.g. `oracle gaussian-beam w0=1e-3 lambda=5e-7 z=1`.
    Oracle { name: String, params: Vec<String> },
}

fn print_sampling(reports: &[SamplingReport]) -> bool {
    let mut ok = true;
    for r in reports {
        let status = if r.aliased { "ALIASED" } else { "ok" };
        ok &= !r.aliased;
        println!(
            "sampling {status} max_phase_step_rad={:.6} {}",
            r.max_phase_step_rad, r.label
        );
    }
    ok
}

fn validate(target: &str) -> anyhow::Result<u8> {
    let (scene, _) = scene::load(target)?;
    let (validity, sampling) = match &scene {
        Scene::Example1(c) => (
            Some(check_validity(&c.geometry(), c.validity_threshold)),
            c.sampling_plan()?,
        ),
        Scene::Example2(c) => (
            Some(check_validity(&c.geometry(), c.validity_threshold)),
            c.sampling_plan()?,
        ),
        Scene::Pipeline(p) => (None, sampling_reports(&p.path_sets()?)),
    };
    let mut ok = true;
    if let Some(v) = &validity {
        for (name, r) in &v.far_field_ratios {
            println!("ratio {name} = {r:.6}");
        }
        if let Some(r) = v.curvature_ratio {
            println!("ratio lambda*(s0+min(s1,s2))/4S^2 = {r:.6}");
        }
        println!("threshold {}", v.pass_threshold);
        ok &= v.passed();
    }
    ok &= print_sampling(&sampling);
    println!("{}", if ok { "PASS" } else { "FAIL" });
    Ok(if ok { 0 } else { EXIT_WARNINGS })
}

fn run(target: &str, output: &std::path::Path, strict: bool) -> anyhow::Result<u8> {
    let (scene, source) = scene::load(target)?;
    let bundle = bundle::run(&scene, &source)?;
    bundle.write(output)?;
    for w in &bundle.warnings {
        log::warn!("{w}");
    }
    Ok(if strict && !bundle.warnings.is_empty() {
        EXIT_WARNINGS
    } else {
        0
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scene,
            output,
            strict,
            threads,
        } => {
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_ERROR);
                }
            }
            run(&scene, &output, strict)
        }
        Command::Validate { scene } => validate(&scene),
        Command::Oracle { name, params } => oracle::evaluate(&name, &params).map(|csv| {
            print!("{csv}");
            0
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
