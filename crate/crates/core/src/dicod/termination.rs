//! Counting-based global termination detection.
//!
//! A controller repeatedly collects a [`ProbeReply`] from every worker. The
//! computation has terminated once two consecutive probe waves are identical,
//! every worker is locally converged, and the total number of sent messages
//! equals the total number of consumed ones. Any update or message consumption
//! bumps the worker's epoch, so activity between the waves breaks the match.

/// A worker's answer to a probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeReply {
    pub worker: usize,
    pub epoch: u64,
    pub local_converged: bool,
    pub sent: u64,
    pub received: u64,
}

#[derive(Debug, Default, Clone)]
pub struct TerminationDetector {
    previous: Option<Vec<ProbeReply>>,
    fired: usize,
}

impl TerminationDetector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds one probe wave, ordered by worker. Returns true when termination
    /// is detected.
    pub fn observe(&mut self, replies: &[ProbeReply]) -> bool {
        let sent: u64 = replies.iter().map(|r| r.sent).sum();
        let received: u64 = replies.iter().map(|r| r.received).sum();
        let quiescent = replies.iter().all(|r| r.local_converged) && sent == received;
        let fire = quiescent && self.previous.as_deref() == Some(replies);
        self.previous = quiescent.then(|| replies.to_vec());
        if fire {
            self.fired += 1;
        }
        fire
    }

    /// Number of waves that reported termination.
    pub fn fired(&self) -> usize {
        self.fired
    }
}
