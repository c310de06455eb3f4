//! Drive the command runner from a config file, as `birkhoff --config` does,
//! and write a spectrum CSV and plot into a temporary directory.
//!
//!     cargo run --release --example cli_config

use birkhoff::cli::{run_command, RunConfig};

fn main() -> birkhoff::Result<()> {
    let dir = std::env::temp_dir().join("birkhoff-cli-example");
    std::fs::create_dir_all(&dir).map_err(|source| birkhoff::Error::Io {
        path: dir.clone(),
        source,
    })?;
    let cfg_path = dir.join("spectrum.cfg");
    let csv = dir.join("spectrum.csv");
    let text = format!(
        "command=spectrum\nsystem=gauss\nparam=r=2\nalpha=1e2:1e5:13\ntol=1e-9\nout={}\nplot={}\n",
        csv.display(),
        dir.display()
    );
    std::fs::write(&cfg_path, text).map_err(|source| birkhoff::Error::Io {
        path: cfg_path.clone(),
        source,
    })?;

    let args = vec!["birkhoff".to_string(), "--config".into(), cfg_path.display().to_string()];
    let cfg = RunConfig::parse_from(args)?;
    let outcome = run_command(&cfg)?;
    println!("{outcome:?}");
    let out = std::fs::read_to_string(&csv).map_err(|source| birkhoff::Error::Io { path: csv.clone(), source })?;
    for line in out.lines().take(4) {
        println!("{line}");
    }
    println!("plot in {}", dir.join("spectrum.svg").display());
    Ok(())
}
