use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use berrylab_core::{Error, Result};

use crate::args::{Command, RerunArgs};
use crate::commands;

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub invocation: Command,
    pub outputs: Vec<PathBuf>,
    /// The only field allowed to differ between reruns.
    pub elapsed_seconds: f64,
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn execute(cmd: Command) -> Result<()> {
    let start = Instant::now();
    let outputs = commands::run(&cmd)?;
    let out = cmd.out().expect("commands with outputs").clone();
    let name = cmd.name();
    let manifest = Manifest {
        tool: "berrylab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        invocation: cmd,
        outputs,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    let path = manifest_path(&out);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    eprintln!("{name}: manifest {}", path.display());
    Ok(())
}

pub fn rerun(args: &RerunArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.manifest)?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("manifest {}: {e}", args.manifest.display())))?;
    if manifest.tool != "berrylab" {
        return Err(Error::Parse(format!("manifest written by {:?}", manifest.tool)));
    }
    if manifest.version != env!("CARGO_PKG_VERSION") {
        eprintln!(
            "warning: manifest from version {}, running {}",
            manifest.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    let mut cmd = manifest.invocation;
    if let Some(out) = &args.out {
        cmd.redirect(out.clone());
    }
    execute(cmd)
}
