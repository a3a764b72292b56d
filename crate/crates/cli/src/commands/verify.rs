use std::path::Path;

use anyhow::{bail, Result};
use clap::Args;
use yamabe_glue::verify::run_all;

use crate::run::Run;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

pub fn run(args: &VerifyArgs, config: Option<&Path>, out: &Path) -> Result<()> {
    let mut run = Run::start("verify", config, out)?;
    run.set_seed(args.seed);
    let results = run.timed("verify", || Ok(run_all(args.seed)))?;
    for c in &results {
        println!("[{}] {:>2} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name, c.detail);
    }
    run.write_json("verify.json", &results)?;
    run.finish()?;
    let failed = results.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        bail!("verify: {failed} of {} criteria failed", results.len());
    }
    Ok(())
}
