use std::path::PathBuf;

use cde_core::economics::solution::Solution;
use cde_core::economics::utilities;
use cde_core::mechanism::{run, MechanismConfig, SelectionPolicy, TieBreak, Variant};
use clap::Args;
use serde_json::json;

use crate::error::CliError;
use crate::files;
use crate::report::{pair_json, render_pair, Verification};

#[derive(Debug, Args)]
pub struct RunArgs {
    /// 1 = peer payments, 2 = broker.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub algo: u8,
    #[arg(long)]
    pub instance: PathBuf,
    /// Break transmitter ties at random with this seed instead of picking the lowest index.
    #[arg(long)]
    pub tie_seed: Option<u64>,
    /// Draw encoding vectors at random with this seed instead of the deterministic sweep.
    #[arg(long)]
    pub selection_seed: Option<u64>,
    /// Work over GF(q) instead of the field recorded in the instance.
    #[arg(long)]
    pub q: Option<u64>,
    /// Also certify rationality, stability and optimality of the output.
    #[arg(long)]
    pub verify: bool,
    /// Transcript file [default: <instance>.algo<N>.transcript.json]
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Solution file [default: <instance>.algo<N>.solution.json]
    #[arg(long)]
    pub solution: Option<PathBuf>,
    /// Print machine-readable JSON instead of tables.
    #[arg(long)]
    pub json: bool,
}

impl RunArgs {
    pub fn config(&self) -> MechanismConfig {
        let variant = if self.algo == 1 { Variant::PeerPayments } else { Variant::Broker };
        let mut config = MechanismConfig::new(variant);
        if let Some(seed) = self.tie_seed {
            config = config.with_tie_break(TieBreak::SeededRandom { seed });
        }
        if let Some(seed) = self.selection_seed {
            config = config.with_selection(SelectionPolicy::Randomized { seed });
        }
        if let Some(q) = self.q {
            config = config.with_q(q);
        }
        config
    }
}

fn describe(config: &MechanismConfig) -> String {
    let algo = match config.variant {
        Variant::PeerPayments => "algorithm 1 (peer payments)",
        Variant::Broker => "algorithm 2 (broker)",
    };
    let tie = match config.tie_break {
        TieBreak::LowestIndex => "lowest index".to_string(),
        TieBreak::SeededRandom { seed } => format!("seeded random (seed {seed})"),
    };
    let selection = match config.selection {
        SelectionPolicy::Deterministic => "deterministic".to_string(),
        SelectionPolicy::Randomized { seed } => format!("randomized (seed {seed})"),
    };
    format!("{algo}, tie-break {tie}, vector selection {selection}")
}

pub fn cmd_run(args: &RunArgs) -> Result<bool, CliError> {
    let instance = files::read_instance(&args.instance)?;
    let config = args.config();
    let outcome = run(&instance, &config)?;
    let verification =
        if args.verify { Some(Verification::of(&instance, &outcome.rates, &outcome.payments).map_err(add_verify_hint)?) } else { None };

    let transcript_path =
        args.transcript.clone().unwrap_or_else(|| files::sibling(&args.instance, &format!("algo{}.transcript.json", args.algo)));
    let solution_path =
        args.solution.clone().unwrap_or_else(|| files::sibling(&args.instance, &format!("algo{}.solution.json", args.algo)));
    files::write(&transcript_path, &outcome.transcript.to_json())?;
    files::write(&solution_path, &Solution::new(outcome.rates.clone(), outcome.payments.clone()).to_json())?;

    let passed = verification.as_ref().is_none_or(Verification::passed);
    if args.json {
        let value = json!({
            "instance_digest": instance.digest(),
            "q": outcome.transcript.q,
            "config": config,
            "rounds": outcome.transcript.rounds.len(),
            "solution": pair_json(&instance, &outcome.rates, &outcome.payments)?,
            "transcript_file": transcript_path,
            "solution_file": solution_path,
            "verification": verification.as_ref().map(Verification::to_json_value),
        });
        println!("{}", serde_json::to_string_pretty(&value).expect("json output"));
    } else {
        let u = utilities(&instance, &outcome.rates, &outcome.payments)?;
        println!(
            "instance {}: n={} k={} q={} digest {}",
            args.instance.display(),
            instance.n(),
            instance.k(),
            outcome.transcript.q,
            instance.digest()
        );
        println!("{}", describe(&config));
        println!("rounds: {}", outcome.transcript.rounds.len());
        print!("{}", render_pair(&instance, &outcome.rates, &outcome.payments, &u));
        println!("transcript: {}", transcript_path.display());
        println!("solution: {}", solution_path.display());
        if let Some(v) = &verification {
            print!("{}", v.render_text());
        }
    }
    Ok(passed)
}

fn add_verify_hint(e: CliError) -> CliError {
    match e {
        CliError::Budget(msg) => CliError::Budget(format!("{msg}; rerun without --verify to skip the exhaustive checks")),
        other => other,
    }
}
