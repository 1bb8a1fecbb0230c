use std::path::PathBuf;

use cde_core::economics::utilities;
use clap::Args;
use serde_json::json;

use crate::error::CliError;
use crate::files;
use crate::report::{pair_json, render_pair, Verification};

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Solution file: rates plus a payment matrix or a broker ledger.
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long)]
    pub json: bool,
}

/// Certifies an arbitrary rate-payment pair. Succeeds iff the pair is stable and optimal.
pub fn cmd_verify(args: &VerifyArgs) -> Result<bool, CliError> {
    let instance = files::read_instance(&args.instance)?;
    let solution = files::read_solution(&args.solution)?;
    let (r, p) = (&solution.rates, &solution.payments);
    let verification = Verification::of(&instance, r, p)?;
    if args.json {
        let value = json!({
            "instance_digest": instance.digest(),
            "solution": pair_json(&instance, r, p)?,
            "verification": verification.to_json_value(),
        });
        println!("{}", serde_json::to_string_pretty(&value).expect("json output"));
    } else {
        let u = utilities(&instance, r, p)?;
        print!("{}", render_pair(&instance, r, p, &u));
        print!("{}", verification.render_text());
    }
    Ok(verification.passed())
}
