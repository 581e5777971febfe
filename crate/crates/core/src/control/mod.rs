//! The control protocol: bootstrap, key handoff, command construction and
//! verification, replay state, and command privacy.

pub mod app;
pub mod authorize;
pub mod bootstrap;
pub mod command;
pub mod fixture;
pub mod handoff;
pub mod privacy;
pub mod replay;
pub mod token;

pub use app::{AckEvent, AckScheme, AppSession, IssueError, LinkConfig, TimeoutAction};
pub use authorize::{authorize_app, grant_namespace, Grant};
pub use bootstrap::{bootstrap, BootstrapError, BootstrapOffer, BootstrapRecord, Device};
pub use command::{build_command, derive_app_key, parse_command, AppCredentials, AuthMode, ParsedCommand};
pub use fixture::{FixtureConfig, FixtureState, Outcome, RejectReason, Verdict};
pub use handoff::{handoff_name, open_handoff, parse_handoff, HandoffError, HandoffReply};
pub use replay::ReplayTable;
pub use token::{AckRequest, AuthToken, Authenticator, ReplayState};
