mod config;
mod fixtures;
mod http;
mod pki;
mod serve;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use cic_core::harness;
use cic_core::KeyUsage;

#[derive(Parser)]
#[command(name = "cic", version, about = "Certified identity claims toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    Aa,
    Rp,
    Subject,
}

#[derive(Clone, Copy, ValueEnum)]
enum UsageArg {
    Signature,
    Encryption,
}

impl From<UsageArg> for KeyUsage {
    fn from(u: UsageArg) -> Self {
        match u {
            UsageArg::Signature => KeyUsage::Signature,
            UsageArg::Encryption => KeyUsage::Encryption,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its report.
    Run {
        scenario: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value = "json")]
        report: ReportFormat,
    },
    /// Run every scenario; exits non-zero if any fails.
    RunAll {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value = "json")]
        report: ReportFormat,
    },
    /// List the scenario catalog.
    List,
    /// Run an HTTP service.
    Serve {
        #[arg(value_enum)]
        role: Role,
        #[arg(long)]
        config: PathBuf,
        /// Overrides the relying party's nonce lifetime.
        #[arg(long)]
        ttl_seconds: Option<i64>,
    },
    /// Generate a key pair file.
    Keygen {
        #[arg(long, value_enum)]
        usage: UsageArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Issue certificates.
    #[command(subcommand)]
    Cert(pki::CertCommand),
    /// Write keys, certificates, data and configs for a local three-service setup.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Ports for the authority, relying party and wallet.
        #[arg(long, value_delimiter = ',', default_values_t = [7301u16, 7302, 7303])]
        ports: Vec<u16>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        // a closed downstream pipe is not our failure
        Err(e)
            if e
                .downcast_ref::<std::io::Error>()
                .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Run {
            scenario,
            seed,
            report,
        } => {
            let r = harness::run_scenario(&scenario, seed)?;
            print_report(&mut out, &r, report)?;
            Ok(if r.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::RunAll { seed, report } => {
            let all = harness::run_all(seed);
            for r in &all.reports {
                print_report(&mut out, r, report)?;
            }
            if let ReportFormat::Text = report {
                let passed = all.reports.iter().filter(|r| r.pass).count();
                writeln!(out, "{passed}/{} scenarios pass", all.reports.len())?;
            }
            Ok(ExitCode::from(all.exit_code() as u8))
        }
        Command::List => {
            for s in harness::list_scenarios() {
                writeln!(out, "{:<32} {:<16} {}", s.name, s.expectation, s.threat)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve {
            role,
            config,
            ttl_seconds,
        } => {
            tracing_subscriber::fmt()
                .with_writer(std::io::stderr)
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| "info".into()),
                )
                .init();
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                match role {
                    Role::Aa => serve::aa::run(&config).await,
                    Role::Rp => serve::rp::run(&config, ttl_seconds).await,
                    Role::Subject => serve::subject::run(&config).await,
                }
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Keygen { usage, out: path } => {
            let pair = pki::keygen(usage.into(), &path)?;
            writeln!(out, "{}", cic_core::canonical::encode_string(&pair.public())?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Cert(cmd) => {
            pki::cert(cmd)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Fixtures {
            out: dir,
            seed,
            ports,
        } => {
            anyhow::ensure!(ports.len() == 3, "--ports takes three comma-separated ports");
            fixtures::write(&dir, seed, [ports[0], ports[1], ports[2]])?;
            writeln!(out, "fixtures written to {}", dir.display())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_report(
    out: &mut impl Write,
    r: &harness::ScenarioReport,
    format: ReportFormat,
) -> Result<()> {
    match format {
        ReportFormat::Json => {
            out.write_all(&r.to_canonical())?;
            out.write_all(b"\n")?;
        }
        ReportFormat::Text => out.write_all(r.to_text().as_bytes())?,
    }
    Ok(())
}
