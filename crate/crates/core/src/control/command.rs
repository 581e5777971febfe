//! Command interests: `name_Fix / count / name_App / cmd / token`.
//!
//! `count` is a single byte: the low six bits give the number of components
//! in `name_App`, bit 7 marks an encrypted `cmd`. The token's authenticator
//! covers everything before it plus the replay state and the ack request.

use rand::RngCore;
use thiserror::Error;

use crate::crypto::{hmac_sha256, hmac_sha256_verify, KeyPair, PublicKey};
use crate::name::{Name, NameError};
use crate::packet::Interest;

use super::token::{AckRequest, AuthToken, Authenticator, ReplayState, TokenError};

pub const AUTH_DOMAIN: &[u8] = b"lumen/cmd-auth/v1\0";
pub const ENCRYPTED_FLAG: u8 = 0x80;
const COUNT_MASK: u8 = 0x3F;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AuthMode {
    Sig,
    Mac,
}

impl AuthMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AuthMode::Sig => "sig",
            AuthMode::Mac => "mac",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommandError {
    #[error("no key for {0:?} mode")]
    NoKeyForMode(AuthMode),
    #[error(transparent)]
    Name(#[from] NameError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("interest is not under this fixture's name")]
    WrongFixture,
    #[error("name too short for the command layout")]
    TooShort,
    #[error("bad component-count byte")]
    BadCount,
    #[error(transparent)]
    Token(#[from] TokenError),
}

/// `k_App = HMAC-SHA-256(k_Fix, encode(name_App))`.
pub fn derive_app_key(k_fix: &[u8; 32], name_app: &Name) -> [u8; 32] {
    hmac_sha256(k_fix, &name_app.encode())
}

/// An application's keys. Either may be absent until provisioned.
#[derive(Debug, Clone)]
pub struct AppCredentials {
    pub name_app: Name,
    pub keypair: Option<KeyPair>,
    pub k_app: Option<[u8; 32]>,
}

/// Everything in the command name except the token.
pub fn command_prefix(name_fix: &Name, name_app: &Name, cmd: &[u8], encrypted: bool) -> Result<Name, NameError> {
    if name_app.len() > usize::from(COUNT_MASK) {
        return Err(NameError::TooManyComponents);
    }
    let mut count = name_app.len() as u8;
    if encrypted {
        count |= ENCRYPTED_FLAG;
    }
    let mut n = name_fix.child(vec![count])?;
    n = n.join(name_app)?;
    n.push(cmd.to_vec())?;
    Ok(n)
}

/// The bytes an authenticator covers.
pub fn authenticated_bytes(prefix: &Name, state: &ReplayState, ack: &AckRequest) -> Vec<u8> {
    let mut out = Vec::with_capacity(AUTH_DOMAIN.len() + 256);
    out.extend_from_slice(AUTH_DOMAIN);
    prefix.encode_into(&mut out);
    out.extend_from_slice(&state.encode());
    ack.encode_into(&mut out);
    out
}

/// Builds a command interest. `cmd` is the component as sent: ciphertext
/// when `encrypted` is set.
#[allow(clippy::too_many_arguments)]
pub fn build_command<R: RngCore + ?Sized>(
    creds: &AppCredentials,
    name_fix: &Name,
    cmd: &[u8],
    encrypted: bool,
    mode: AuthMode,
    state: ReplayState,
    ack: AckRequest,
    lifetime_ms: u32,
    rng: &mut R,
) -> Result<Interest, CommandError> {
    let prefix = command_prefix(name_fix, &creds.name_app, cmd, encrypted)?;
    let bytes = authenticated_bytes(&prefix, &state, &ack);
    let auth = match mode {
        AuthMode::Sig => Authenticator::Sig(
            creds
                .keypair
                .as_ref()
                .ok_or(CommandError::NoKeyForMode(mode))?
                .sign(&bytes),
        ),
        AuthMode::Mac => Authenticator::Mac(hmac_sha256(
            creds.k_app.as_ref().ok_or(CommandError::NoKeyForMode(mode))?,
            &bytes,
        )),
    };
    let token = AuthToken { state, ack, auth };
    let name = prefix.child(token.encode())?;
    Ok(Interest::new(name, lifetime_ms, rng))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedCommand {
    pub name_fix: Name,
    pub name_app: Name,
    /// As received; ciphertext when `encrypted`.
    pub cmd: Vec<u8>,
    pub encrypted: bool,
    pub token: AuthToken,
    /// The name without its token component.
    pub prefix: Name,
}

impl ParsedCommand {
    pub fn authenticated_bytes(&self) -> Vec<u8> {
        authenticated_bytes(&self.prefix, &self.token.state, &self.token.ack)
    }

    pub fn mode(&self) -> AuthMode {
        match self.token.auth {
            Authenticator::Sig(_) => AuthMode::Sig,
            Authenticator::Mac(_) => AuthMode::Mac,
        }
    }

    pub fn verify_sig(&self, pk: &PublicKey) -> bool {
        match &self.token.auth {
            Authenticator::Sig(s) => pk.verify(&self.authenticated_bytes(), s).unwrap_or(false),
            Authenticator::Mac(_) => false,
        }
    }

    pub fn verify_mac(&self, k_app: &[u8; 32]) -> bool {
        match &self.token.auth {
            Authenticator::Mac(m) => hmac_sha256_verify(k_app, &self.authenticated_bytes(), m),
            Authenticator::Sig(_) => false,
        }
    }
}

/// Splits a command name into its regions.
pub fn parse_command(name: &Name, name_fix: &Name) -> Result<ParsedCommand, ParseError> {
    if !name_fix.is_prefix_of(name) {
        return Err(ParseError::WrongFixture);
    }
    let f = name_fix.len();
    let count = name.get(f).ok_or(ParseError::TooShort)?;
    let [count] = count else {
        return Err(ParseError::BadCount);
    };
    if count & !(COUNT_MASK | ENCRYPTED_FLAG) != 0 {
        return Err(ParseError::BadCount);
    }
    let n_app = usize::from(count & COUNT_MASK);
    // fix, count, app, cmd, token
    if name.len() != f + 1 + n_app + 2 {
        return Err(ParseError::TooShort);
    }
    let name_app = name.slice(f + 1, f + 1 + n_app);
    let cmd = name.get(f + 1 + n_app).expect("length checked").to_vec();
    let token = AuthToken::decode(name.last().expect("length checked"))?;
    Ok(ParsedCommand {
        name_fix: name_fix.clone(),
        name_app,
        cmd,
        encrypted: count & ENCRYPTED_FLAG != 0,
        token,
        prefix: name.prefix(name.len() - 1),
    })
}
