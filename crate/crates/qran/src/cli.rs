//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use qran_core::authz::{validate_token, AuthServer, Jwks, ResourceConfig};
use qran_core::crypto::sig;
use qran_core::entropy::EntropySource;
use qran_core::netsim::{default_scenario, ScenarioConfig};
use qran_core::pki::{
    self, CaState, CertChain, Certificate, KeyUsage, KeyUsages, RevocationList, RevocationReason,
    RevocationView,
};
use qran_core::time::{SimDuration, SimTime};
use serde::{Deserialize, Serialize};

use crate::armor;
use crate::compare::compare_profiles;
use crate::entropy::SourceChoice;
use crate::kat::run_suite;
use crate::report::exit;
use crate::runner::{load_scenario, run_scenario, HarnessError, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "qran", version, about = "Post-quantum O-RAN channel toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Markdown,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every channel of a scenario and print the report.
    Run(RunArgs),
    /// Replay a directory of known-answer files.
    Kat {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
    /// Rank signature size classes and modes by handshake bytes.
    Compare {
        /// Scenario file, or `default`.
        #[arg(long, default_value = "default")]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the built-in scenario as JSON.
    Scenario,
    /// Operate a file-backed certificate authority.
    #[command(subcommand)]
    Ca(CaCommand),
    /// Issue and validate access tokens.
    #[command(subcommand)]
    Token(TokenCommand),
    /// Inspect the authorization server's published keys.
    #[command(subcommand)]
    Jwks(JwksCommand),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file, or `default`.
    #[arg(long, default_value = "default")]
    pub scenario: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Invert the exit status: succeed only if something fails.
    #[arg(long)]
    pub expect_failure: bool,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Admit TEST-ONLY size-class signatures.
    #[arg(long)]
    pub comparison_mode: bool,
    /// Also replay the KAT suite in this directory.
    #[arg(long)]
    pub kat: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CaCommand {
    /// Create a root CA state directory.
    Init {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = "CN=SMO PQ-CA")]
        name: String,
        #[arg(long, default_value = pki::DEFAULT_PROFILE)]
        profile: String,
        /// Seed for the simulated source; ignored with QRAN_ENTROPY=os.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Issue a leaf certificate; writes the chain to `--out`.
    Issue {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        subject: String,
        #[arg(long)]
        profile: Option<String>,
        #[arg(long, default_value_t = 7)]
        days: u32,
        #[arg(long, default_value_t = 0)]
        at: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify a chain against an anchor.
    Verify {
        #[arg(long)]
        anchor: PathBuf,
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        crl: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        at: u64,
    },
    /// Revoke the leaf of a chain file; writes the new CRL to `--out`.
    Revoke {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        cert: PathBuf,
        #[arg(long, value_enum, default_value = "unspecified")]
        reason: Reason,
        #[arg(long, default_value_t = 0)]
        at: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    Unspecified,
    KeyCompromise,
    CaCompromise,
    Superseded,
    Cessation,
}

impl From<Reason> for RevocationReason {
    fn from(r: Reason) -> Self {
        match r {
            Reason::Unspecified => RevocationReason::Unspecified,
            Reason::KeyCompromise => RevocationReason::KeyCompromise,
            Reason::CaCompromise => RevocationReason::CaCompromise,
            Reason::Superseded => RevocationReason::Superseded,
            Reason::Cessation => RevocationReason::CessationOfOperation,
        }
    }
}

#[derive(Debug, Args)]
pub struct ServerArgs {
    #[arg(long, default_value = "smo-auth")]
    pub issuer: String,
    #[arg(long, default_value = pki::DEFAULT_PROFILE)]
    pub profile: String,
    /// Seed for the simulated source; ignored with QRAN_ENTROPY=os.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum TokenCommand {
    /// Issue an access token; prints the compact form.
    Issue {
        #[command(flatten)]
        server: ServerArgs,
        #[arg(long)]
        client: String,
        #[arg(long, required = true)]
        scope: Vec<String>,
        #[arg(long)]
        aud: String,
        #[arg(long, default_value_t = 3600)]
        ttl: u64,
        #[arg(long, default_value_t = 0)]
        at: u64,
        /// Also write the server's key set here.
        #[arg(long)]
        jwks_out: Option<PathBuf>,
    },
    /// Validate a compact token against a key set.
    Validate {
        /// Token file, or `-` for stdin.
        #[arg(long)]
        token: PathBuf,
        #[arg(long)]
        jwks: PathBuf,
        #[arg(long)]
        aud: String,
        #[arg(long)]
        scope: String,
        #[arg(long)]
        issuer: Option<String>,
        #[arg(long, default_value_t = 0)]
        at: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum JwksCommand {
    /// Print the authorization server's key set.
    Show {
        #[command(flatten)]
        server: ServerArgs,
        #[arg(long, default_value_t = 0)]
        at: u64,
    },
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub msg: String,
}

fn config_err(msg: impl ToString) -> Failure {
    Failure {
        code: exit::CONFIG_ERROR,
        msg: msg.to_string(),
    }
}

fn protocol_err(msg: impl ToString) -> Failure {
    Failure {
        code: exit::PROTOCOL_FAILURE,
        msg: msg.to_string(),
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        config_err(e)
    }
}

type CliResult = Result<i32, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s).map_err(config_err)?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn write(path: &Path, data: &str) -> Result<(), Failure> {
    fs::write(path, data).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn scenario(name: &str, seed: Option<u64>) -> Result<ScenarioConfig, Failure> {
    let mut cfg = if name == "default" {
        default_scenario()
    } else {
        load_scenario(Path::new(name))?
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn options(threads: Option<usize>, comparison_mode: bool) -> RunOptions {
    let d = RunOptions::default();
    RunOptions {
        threads: threads.unwrap_or(d.threads),
        comparison_mode,
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(config_err)?;
    if !text.ends_with('\n') {
        out.write_all(b"\n").map_err(config_err)?;
    }
    Ok(())
}

fn cmd_run(a: RunArgs, out: &mut dyn Write) -> CliResult {
    let cfg = scenario(&a.scenario, a.seed)?;
    let mut report = run_scenario(&cfg, &options(a.threads, a.comparison_mode))?;
    if let Some(dir) = &a.kat {
        report.kat = Some(run_suite(dir).map_err(config_err)?);
    }
    let text = match a.format {
        Format::Json => report.to_json(),
        Format::Markdown => report.to_markdown(),
    };
    match &a.out {
        Some(p) => write(p, &text)?,
        None => emit(out, &text)?,
    }
    let code = report.exit_code();
    Ok(match (a.expect_failure, code) {
        (false, c) => c,
        (true, exit::PASS) => exit::PROTOCOL_FAILURE,
        (true, _) => exit::PASS,
    })
}

fn cmd_kat(dir: &Path, format: Format, out: &mut dyn Write) -> CliResult {
    let summary = run_suite(dir).map_err(config_err)?;
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&summary).expect("summary serializes"),
        Format::Markdown => {
            let mut s = String::new();
            for f in &summary.files {
                let status = match (&f.mismatch, &f.error) {
                    (Some(m), _) => format!("FAIL {m}"),
                    (None, Some(e)) => format!("FAIL {e}"),
                    _ => "PASS".to_string(),
                };
                s.push_str(&format!(
                    "{} {} ({} vectors): {status}\n",
                    f.file, f.alg, f.vectors
                ));
            }
            s.push_str(&format!(
                "{} vectors, {}\n",
                summary.vectors,
                if summary.passed {
                    "all passed"
                } else {
                    "FAILED"
                }
            ));
            s
        }
    };
    emit(out, &text)?;
    Ok(if summary.passed {
        exit::PASS
    } else {
        exit::PROTOCOL_FAILURE
    })
}

/// On-disk CA: an entropy seed plus the journal of issuance operations.
/// Replaying the journal rebuilds the exact same CA, so the file is secret.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaJournal {
    pub name: String,
    pub profile: String,
    pub seed: String,
    pub ops: Vec<CaOp>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum CaOp {
    Issue {
        subject: String,
        profile: String,
        days: u32,
        at: u64,
    },
    Revoke {
        serial: String,
        reason: Reason,
        at: u64,
    },
}

struct ReplayedCa {
    ca: CaState,
    entropy: EntropySource,
    last_crl: Option<RevocationList>,
    last_chain: Option<CertChain>,
}

const JOURNAL: &str = "ca.json";
const ROOT_CERT: &str = "root.pem";

fn load_journal(dir: &Path) -> Result<CaJournal, Failure> {
    serde_json::from_str(&read(&dir.join(JOURNAL))?).map_err(config_err)
}

fn save_journal(dir: &Path, j: &CaJournal) -> Result<(), Failure> {
    write(
        &dir.join(JOURNAL),
        &serde_json::to_string_pretty(j).expect("journal serializes"),
    )
}

fn replay(j: &CaJournal) -> Result<ReplayedCa, Failure> {
    let seed: [u8; 32] = hex::decode(&j.seed)
        .ok()
        .and_then(|v| v.try_into().ok())
        .ok_or_else(|| config_err("ca.json: seed must be 32 hex bytes"))?;
    let mut entropy = EntropySource::qrng_sim("ca", seed);
    let ca = CaState::init(&mut entropy, &j.profile, &j.name, SimTime::ZERO).map_err(config_err)?;
    let mut r = ReplayedCa {
        ca,
        entropy,
        last_crl: None,
        last_chain: None,
    };
    for op in &j.ops {
        apply(&mut r, op)?;
    }
    Ok(r)
}

fn apply(r: &mut ReplayedCa, op: &CaOp) -> Result<(), Failure> {
    match op {
        CaOp::Issue {
            subject,
            profile,
            days,
            at,
        } => {
            let usage = KeyUsages::of(&[KeyUsage::TlsAuth]);
            let (_, cert) =
                r.ca.issue_leaf(
                    &mut r.entropy,
                    profile,
                    subject,
                    usage,
                    *days,
                    SimTime::from_secs(*at),
                )
                .map_err(protocol_err)?;
            r.last_chain = Some(CertChain(vec![cert]));
        }
        CaOp::Revoke { serial, reason, at } => {
            let s: pki::Serial = hex::decode(serial)
                .ok()
                .and_then(|v| v.try_into().ok())
                .ok_or_else(|| config_err(format!("bad serial {serial}")))?;
            let crl =
                r.ca.revoke(
                    &mut r.entropy,
                    &s,
                    (*reason).into(),
                    SimTime::from_secs(*at),
                )
                .map_err(protocol_err)?;
            r.last_crl = Some(crl);
        }
    }
    Ok(())
}

fn certs_from(path: &Path) -> Result<Vec<Certificate>, Failure> {
    armor::decode_all(armor::CERTIFICATE, &read(path)?)
        .map_err(config_err)?
        .iter()
        .map(|d| Certificate::decode(d).map_err(config_err))
        .collect()
}

fn cmd_ca(c: CaCommand, out: &mut dyn Write) -> CliResult {
    match c {
        CaCommand::Init {
            dir,
            name,
            profile,
            seed,
        } => {
            let profile = sig::canonical_name(&profile)
                .map_err(config_err)?
                .to_string();
            let choice = SourceChoice::from_env().map_err(config_err)?;
            let mut src = choice.source("ca-init", seed, &name);
            let ca_seed = src.draw(32).map_err(config_err)?;
            let j = CaJournal {
                name,
                profile,
                seed: hex::encode(ca_seed),
                ops: Vec::new(),
            };
            let r = replay(&j)?;
            fs::create_dir_all(&dir).map_err(config_err)?;
            save_journal(&dir, &j)?;
            write(
                &dir.join(ROOT_CERT),
                &armor::encode(armor::CERTIFICATE, &r.ca.certificate.encode()),
            )?;
            emit(
                out,
                &format!(
                    "root {} serial {}",
                    r.ca.name(),
                    hex::encode(r.ca.certificate.serial)
                ),
            )?;
            Ok(exit::PASS)
        }
        CaCommand::Issue {
            dir,
            subject,
            profile,
            days,
            at,
            out: path,
        } => {
            let mut j = load_journal(&dir)?;
            let mut r = replay(&j)?;
            let op = CaOp::Issue {
                subject,
                profile: profile.unwrap_or_else(|| j.profile.clone()),
                days,
                at,
            };
            apply(&mut r, &op)?;
            j.ops.push(op);
            save_journal(&dir, &j)?;
            let chain = r.last_chain.expect("issued");
            let leaf = chain.leaf().expect("leaf");
            write(&path, &armor::encode(armor::CERTIFICATE, &leaf.encode()))?;
            emit(
                out,
                &format!(
                    "issued {} serial {}",
                    leaf.subject,
                    hex::encode(leaf.serial)
                ),
            )?;
            Ok(exit::PASS)
        }
        CaCommand::Verify {
            anchor,
            chain,
            crl,
            at,
        } => {
            let anchor = certs_from(&anchor)?
                .into_iter()
                .next()
                .ok_or_else(|| config_err("anchor file holds no certificate"))?;
            let chain = CertChain(certs_from(&chain)?);
            let mut view = RevocationView::new();
            for p in &crl {
                for d in armor::decode_all(armor::CRL, &read(p)?).map_err(config_err)? {
                    let l = RevocationList::decode(&d).map_err(config_err)?;
                    let issuer = chain
                        .0
                        .iter()
                        .chain([&anchor])
                        .find(|c| c.subject == l.issuer);
                    if !issuer.is_some_and(|c| l.verify_signature(c)) {
                        return Err(protocol_err(format!(
                            "CRL from {} does not verify",
                            l.issuer
                        )));
                    }
                    view.add(&l);
                }
            }
            match pki::verify_chain(&chain, &anchor, SimTime::from_secs(at), &view) {
                Ok(()) => {
                    emit(out, "OK")?;
                    Ok(exit::PASS)
                }
                Err(reason) => {
                    emit(
                        out,
                        &format!(
                            "REJECT {}",
                            serde_json::to_string(&reason)
                                .expect("reason")
                                .trim_matches('"')
                        ),
                    )?;
                    Ok(exit::PROTOCOL_FAILURE)
                }
            }
        }
        CaCommand::Revoke {
            dir,
            cert,
            reason,
            at,
            out: path,
        } => {
            let leaf = certs_from(&cert)?
                .into_iter()
                .next()
                .ok_or_else(|| config_err("no certificate to revoke"))?;
            let mut j = load_journal(&dir)?;
            let mut r = replay(&j)?;
            let op = CaOp::Revoke {
                serial: hex::encode(leaf.serial),
                reason,
                at,
            };
            apply(&mut r, &op)?;
            j.ops.push(op);
            save_journal(&dir, &j)?;
            let crl = r.last_crl.expect("revoked");
            write(&path, &armor::encode(armor::CRL, &crl.encode()))?;
            emit(
                out,
                &format!(
                    "revoked {} (CRL #{})",
                    hex::encode(leaf.serial),
                    crl.crl_number
                ),
            )?;
            Ok(exit::PASS)
        }
    }
}

fn server(a: &ServerArgs, at: u64) -> Result<AuthServer, Failure> {
    let choice = SourceChoice::from_env().map_err(config_err)?;
    let e = choice.source("auth-server", a.seed, &a.issuer);
    AuthServer::new(&a.issuer, &a.profile, e, SimTime::from_secs(at)).map_err(config_err)
}

fn cmd_token(c: TokenCommand, out: &mut dyn Write) -> CliResult {
    match c {
        TokenCommand::Issue {
            server: sa,
            client,
            scope,
            aud,
            ttl,
            at,
            jwks_out,
        } => {
            let mut s = server(&sa, at)?;
            for sc in &scope {
                s.policy.allow(&client, sc);
            }
            let scopes: Vec<&str> = scope.iter().map(String::as_str).collect();
            let now = SimTime::from_secs(at);
            let t = s
                .issue_token(&client, &scopes, &aud, SimDuration::from_secs(ttl), now)
                .map_err(protocol_err)?;
            if let Some(p) = jwks_out {
                write(&p, &s.jwks(now).to_json())?;
            }
            emit(out, &t.compact())?;
            Ok(exit::PASS)
        }
        TokenCommand::Validate {
            token,
            jwks,
            aud,
            scope,
            issuer,
            at,
        } => {
            let compact = read(&token)?;
            let jwks = Jwks::from_json(&read(&jwks)?).map_err(config_err)?;
            let mut cfg = ResourceConfig::new(&aud);
            cfg.issuer = issuer;
            match validate_token(&cfg, compact.trim(), &scope, SimTime::from_secs(at), &jwks) {
                Ok(claims) => {
                    emit(
                        out,
                        &format!("OK sub={} scope={}", claims.sub, claims.scope),
                    )?;
                    Ok(exit::PASS)
                }
                Err(r) => {
                    emit(out, &format!("REJECT {r}"))?;
                    Ok(exit::PROTOCOL_FAILURE)
                }
            }
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> CliResult {
    match cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Kat { dir, format } => cmd_kat(&dir, format, out),
        Command::Compare {
            scenario: name,
            seed,
            format,
            threads,
        } => {
            let cfg = scenario(&name, seed)?;
            let c = compare_profiles(&cfg, &options(threads, true))?;
            emit(
                out,
                &match format {
                    Format::Json => c.to_json(),
                    Format::Markdown => c.to_markdown(),
                },
            )?;
            Ok(if c.ranking_reproduced() && c.classical_below_hybrid {
                exit::PASS
            } else {
                exit::PROTOCOL_FAILURE
            })
        }
        Command::Scenario => {
            emit(
                out,
                &serde_json::to_string_pretty(&default_scenario()).expect("scenario serializes"),
            )?;
            Ok(exit::PASS)
        }
        Command::Ca(c) => cmd_ca(c, out),
        Command::Token(c) => cmd_token(c, out),
        Command::Jwks(JwksCommand::Show { server: sa, at }) => {
            let s = server(&sa, at)?;
            emit(out, &s.jwks(SimTime::from_secs(at)).to_json())?;
            Ok(exit::PASS)
        }
    }
}
