use std::io::Write;
use std::path::{Path, PathBuf};

use eai_core::attestation::{Attestation, PublicKey, SignerIdentity, VerifyOutcome};
use eai_core::ingest::ListRole;
use eai_core::merkle_registry::{verify, Digest, MerkleError, MerkleRegistry, ProofDocument};
use rand::RngCore;
use serde_json::json;

use crate::args::{AttestCommand, Format, MerkleCommand, Status};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::inputs::Inputs;
use crate::output::{emit, pretty};

/// Validation failures that are an answer rather than an error (a proof that does not hold).
pub enum Verdict {
    Holds,
    Fails,
}

fn merkle_err(path: &Path, e: MerkleError) -> CliError {
    CliError::in_file(path, e)
}

fn root_file_for(registry: &Path) -> PathBuf {
    let mut s = registry.as_os_str().to_owned();
    s.push(".root");
    PathBuf::from(s)
}

pub fn merkle(cfg: &RunConfig, cmd: &MerkleCommand, out: Option<&Path>) -> CliResult<Verdict> {
    let mut inputs = Inputs::default();
    match cmd {
        MerkleCommand::Build { addresses } => {
            let out = out.ok_or_else(|| CliError::invalid("merkle build requires --out <registry path>"))?;
            let list = inputs.list(addresses, ListRole::Exchange)?;
            let reg = MerkleRegistry::build(list.iter()).map_err(|e| merkle_err(addresses, e))?;
            std::fs::write(out, reg.to_registry_file()).map_err(|e| CliError::io(out, e))?;
            let root_path = root_file_for(out);
            std::fs::write(&root_path, format!("{}\n", reg.root())).map_err(|e| CliError::io(&root_path, e))?;
            let summary = match cfg.format_or(Format::Text) {
                Format::Json => pretty(&json!({ "root": reg.root(), "size": reg.len(), "depth": reg.depth() }))?,
                _ => format!("{}\n", reg.root()).into_bytes(),
            };
            emit(None, &summary)?;
        }
        MerkleCommand::Prove { registry, address } => {
            let bytes = inputs.read(registry)?;
            let reg = MerkleRegistry::read_registry_file(&bytes[..]).map_err(|e| merkle_err(registry, e))?;
            let proof = reg.prove(address).map_err(|e| merkle_err(registry, e))?;
            emit(out, &pretty(&ProofDocument::new(proof, reg.root()))?)?;
        }
        MerkleCommand::Verify { proof, root, root_file } => {
            let bytes = inputs.read(proof)?;
            let doc: ProofDocument = serde_json::from_slice(&bytes).map_err(|e| CliError::in_file(proof, e))?;
            let expected = match (root, root_file) {
                (Some(r), _) => r.parse::<Digest>().map_err(|e| CliError::invalid(format!("--root: {e}")))?,
                (None, Some(p)) => {
                    let text = inputs.read(p)?;
                    String::from_utf8_lossy(&text).trim().parse::<Digest>().map_err(|e| CliError::in_file(p, e))?
                }
                (None, None) => doc.root,
            };
            let ok = verify(&expected, &doc.proof());
            let msg = match cfg.format_or(Format::Text) {
                Format::Json => pretty(&json!({ "address": doc.address, "root": expected, "valid": ok }))?,
                _ => format!("{}\n", if ok { "valid" } else { "invalid" }).into_bytes(),
            };
            emit(out, &msg)?;
            return Ok(if ok { Verdict::Holds } else { Verdict::Fails });
        }
    }
    Ok(Verdict::Holds)
}

fn unix_now() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn load_signer(path: &Path) -> CliResult<SignerIdentity> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        if let Ok(meta) = std::fs::metadata(path) {
            if meta.permissions().mode() & 0o077 != 0 {
                eprintln!("warning: {} is readable by other users; expected mode 0600", path.display());
            }
        }
    }
    SignerIdentity::from_seed_hex(&text).map_err(|e| CliError::in_file(path, e))
}

fn write_key_file(path: &Path, seed_hex: &str, force: bool) -> CliResult<()> {
    let mut opts = std::fs::OpenOptions::new();
    opts.write(true);
    if force {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut f = opts.open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            CliError::invalid(format!("{}: key file exists; pass --force to replace it", path.display()))
        } else {
            CliError::io(path, e)
        }
    })?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        f.set_permissions(std::fs::Permissions::from_mode(0o600)).map_err(|e| CliError::io(path, e))?;
    }
    writeln!(f, "{seed_hex}").map_err(|e| CliError::io(path, e))
}

pub fn attest(cfg: &RunConfig, cmd: &AttestCommand, out: Option<&Path>) -> CliResult<Verdict> {
    match cmd {
        AttestCommand::Keygen { key, force } => {
            let mut seed = [0u8; 32];
            rand::rngs::OsRng.fill_bytes(&mut seed);
            let signer = SignerIdentity::from_seed(seed);
            write_key_file(key, &signer.seed_hex(), *force)?;
            let pk = signer.public_key();
            let fp: String = pk.fingerprint().iter().map(|b| format!("{b:02x}")).collect();
            let msg = match cfg.format_or(Format::Text) {
                Format::Json => pretty(&json!({ "key_path": key, "public_key": pk.to_string(), "fingerprint": fp }))?,
                _ => format!("public_key {pk}\nfingerprint {fp}\n").into_bytes(),
            };
            emit(out, &msg)?;
        }
        AttestCommand::Sign { key, address, status, ttl, nonce, now } => {
            let signer = load_signer(key)?;
            let nonce = nonce.unwrap_or_else(|| rand::rngs::OsRng.next_u64());
            let att = signer
                .sign(*address, *status == Status::Eai, *ttl, nonce, now.unwrap_or_else(unix_now))
                .map_err(|e| CliError::invalid(format!("--ttl: {e}")))?;
            emit(out, &pretty(&att)?)?;
        }
        AttestCommand::Verify { attestation, public_key, key, now } => {
            let mut inputs = Inputs::default();
            let bytes = inputs.read(attestation)?;
            let att: Attestation = serde_json::from_slice(&bytes).map_err(|e| CliError::in_file(attestation, e))?;
            let pk = match (public_key, key) {
                (Some(hex), _) => {
                    hex.parse::<PublicKey>().map_err(|e| CliError::invalid(format!("--public-key: {e}")))?
                }
                (None, Some(path)) => load_signer(path)?.public_key(),
                (None, None) => return Err(CliError::invalid("pass --public-key or --key")),
            };
            let outcome = pk.verify(&att, now.unwrap_or_else(unix_now));
            let label = match outcome {
                VerifyOutcome::Valid => "valid",
                VerifyOutcome::Expired => "expired",
                VerifyOutcome::BadSignature => "bad_signature",
            };
            let msg = match cfg.format_or(Format::Text) {
                Format::Json => pretty(&json!({
                    "address": att.address,
                    "is_eai": att.is_eai,
                    "expires_at": att.expires_at,
                    "outcome": outcome,
                }))?,
                _ => format!("{label}\n").into_bytes(),
            };
            emit(out, &msg)?;
            return Ok(if outcome == VerifyOutcome::Valid { Verdict::Holds } else { Verdict::Fails });
        }
    }
    Ok(Verdict::Holds)
}
