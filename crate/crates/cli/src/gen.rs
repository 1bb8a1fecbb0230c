use std::path::PathBuf;

use cde_core::instance::generate;
use clap::Args;

use crate::error::CliError;
use crate::files;

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of users (≥ 2).
    #[arg(long)]
    pub n: usize,
    /// Number of packets.
    #[arg(long)]
    pub k: usize,
    /// Probability that a user initially holds a given packet.
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, env = "CDE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Field size; defaults to the smallest prime ≥ n·k.
    #[arg(long)]
    pub q: Option<u64>,
    /// Instance file to write; without it the instance is printed to stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn cmd_gen(args: &GenArgs) -> Result<bool, CliError> {
    if args.n < 2 {
        return Err(CliError::input("n must be ≥ 2"));
    }
    let mut instance = generate(args.n, args.k, args.density, args.seed).map_err(|e| CliError::input(e.to_string()))?;
    if let Some(q) = args.q {
        instance = instance.with_q(q).map_err(|e| CliError::input(e.to_string()))?;
    }
    let text = instance.render();
    let header = format!("seed {}: n={} k={} q={} density={}", args.seed, instance.n(), instance.k(), instance.q(), args.density);
    match &args.output {
        Some(path) => {
            files::write(path, &text)?;
            println!("{header}");
            println!("wrote {}", path.display());
            println!("digest {}", instance.digest());
        }
        None => {
            print!("{text}");
            eprintln!("{header}");
            eprintln!("digest {}", instance.digest());
        }
    }
    Ok(true)
}
