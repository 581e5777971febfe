//! Packet-loss handling: re-issue the identical interest until an ack
//! arrives or a deadline passes. In hash-chain mode the deadline triggers a
//! fallback to signed acks with a fresh command; the unanswered challenge
//! is never presented again.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetransmitPolicy {
    /// Wait this long for an ack before resending.
    pub timeout_ms: u64,
    /// Give up on the primary scheme this long after the first send.
    pub deadline_ms: u64,
    /// Give up on the fallback this long after it starts.
    pub fallback_deadline_ms: u64,
}

impl Default for RetransmitPolicy {
    fn default() -> Self {
        Self {
            timeout_ms: 200,
            deadline_ms: 2000,
            fallback_deadline_ms: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Primary,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoopOutcome {
    Acked,
    /// Acked through the signed-ack fallback after the chain deadline.
    FellBack,
    Failed,
}

impl LoopOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            LoopOutcome::Acked => "acked",
            LoopOutcome::FellBack => "fell_back",
            LoopOutcome::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tick {
    /// Send the same interest again; next check at `next_at`.
    Resend { next_at: u64 },
    /// Primary deadline passed in chain mode: build a fallback command.
    FallBack,
    Failed,
}

/// Timer bookkeeping for one outstanding command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetransmitState {
    pub policy: RetransmitPolicy,
    pub chain_mode: bool,
    pub phase: Phase,
    pub first_sent: u64,
    pub phase_started: u64,
    pub attempts: u32,
}

impl RetransmitState {
    /// Records the first transmission; returns when to check next.
    pub fn start(policy: RetransmitPolicy, chain_mode: bool, now: u64) -> (Self, u64) {
        let s = Self {
            policy,
            chain_mode,
            phase: Phase::Primary,
            first_sent: now,
            phase_started: now,
            attempts: 1,
        };
        (s, now + policy.timeout_ms)
    }

    /// Called when the ack timer fires without an ack.
    pub fn on_timeout(&mut self, now: u64) -> Tick {
        let deadline = match self.phase {
            Phase::Primary => self.policy.deadline_ms,
            Phase::Fallback => self.policy.fallback_deadline_ms,
        };
        if now.saturating_sub(self.phase_started) >= deadline {
            return match (self.phase, self.chain_mode) {
                (Phase::Primary, true) => Tick::FallBack,
                _ => Tick::Failed,
            };
        }
        self.attempts += 1;
        Tick::Resend {
            next_at: now + self.policy.timeout_ms,
        }
    }

    /// Switches to the fallback phase; returns when to check next.
    pub fn enter_fallback(&mut self, now: u64) -> u64 {
        self.phase = Phase::Fallback;
        self.phase_started = now;
        self.attempts += 1;
        now + self.policy.timeout_ms
    }

    pub fn outcome_on_ack(&self) -> LoopOutcome {
        match self.phase {
            Phase::Primary => LoopOutcome::Acked,
            Phase::Fallback => LoopOutcome::FellBack,
        }
    }
}

/// Runs the loop against a synchronous channel: `send(phase, attempt)`
/// returns whether that transmission was acked before the timeout.
/// Returns the outcome and the number of transmissions.
pub fn ack_retransmit_loop(
    policy: RetransmitPolicy,
    chain_mode: bool,
    mut send: impl FnMut(Phase, u32) -> bool,
) -> (LoopOutcome, u32) {
    let mut now = 0;
    let (mut st, mut next) = RetransmitState::start(policy, chain_mode, now);
    loop {
        if send(st.phase, st.attempts) {
            return (st.outcome_on_ack(), st.attempts);
        }
        now = next;
        match st.on_timeout(now) {
            Tick::Resend { next_at } => next = next_at,
            Tick::FallBack => next = st.enter_fallback(now),
            Tick::Failed => return (LoopOutcome::Failed, st.attempts),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_single_send() {
        assert_eq!(
            ack_retransmit_loop(RetransmitPolicy::default(), true, |_, _| true),
            (LoopOutcome::Acked, 1)
        );
    }

    #[test]
    fn acked_on_third_try() {
        assert_eq!(
            ack_retransmit_loop(RetransmitPolicy::default(), false, |_, a| a == 3),
            (LoopOutcome::Acked, 3)
        );
    }

    #[test]
    fn chain_falls_back() {
        let (out, attempts) =
            ack_retransmit_loop(RetransmitPolicy::default(), true, |phase, _| phase == Phase::Fallback);
        assert_eq!(out, LoopOutcome::FellBack);
        // 2000 ms / 200 ms primary sends, then one fallback send
        assert_eq!(attempts, 11);
    }

    #[test]
    fn fallback_can_fail() {
        assert_eq!(
            ack_retransmit_loop(RetransmitPolicy::default(), true, |_, _| false).0,
            LoopOutcome::Failed
        );
        assert_eq!(
            ack_retransmit_loop(RetransmitPolicy::default(), false, |_, _| false),
            (LoopOutcome::Failed, 10)
        );
    }
}
