//! Local states of the round-implementation layer: a round counter and the
//! messages received so far, each message being a `(round, sender)` pair.

use std::fmt;

use crate::process::{ProcessId, ProcessSet};

/// A message tagged with its round, as seen by its receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Message {
    pub round: usize,
    pub sender: ProcessId,
}

impl Message {
    pub fn new(round: usize, sender: usize) -> Self {
        Message {
            round,
            sender: ProcessId(sender),
        }
    }
}

/// `q = (round, mes)`. Messages are kept grouped by round: `received[r-1]` is
/// `q(r)`, the senders heard at round `r`. Trailing empty rounds are trimmed so
/// that equality is extensional.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalState {
    round: usize,
    received: Vec<ProcessSet>,
}

impl LocalState {
    pub fn new(round: usize) -> Self {
        assert!(round >= 1, "local state rounds start at 1");
        LocalState {
            round,
            received: Vec::new(),
        }
    }

    /// The state `(1, {})` every process starts in.
    pub fn initial() -> Self {
        Self::new(1)
    }

    pub fn from_messages<I: IntoIterator<Item = Message>>(round: usize, messages: I) -> Self {
        let mut q = Self::new(round);
        for m in messages {
            q.receive(m.round, m.sender.0);
        }
        q
    }

    /// Builds a state whose rounds `1..=sets.len()` carry the given senders.
    pub fn from_rounds(round: usize, sets: &[ProcessSet]) -> Self {
        let mut q = LocalState {
            round,
            received: sets.to_vec(),
        };
        q.trim();
        q
    }

    fn trim(&mut self) {
        while self.received.last().is_some_and(|s| s.is_empty()) {
            self.received.pop();
        }
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// `q(r)`: senders of the round-`r` messages received.
    pub fn heard(&self, round: usize) -> ProcessSet {
        if round == 0 {
            return ProcessSet::EMPTY;
        }
        self.received.get(round - 1).copied().unwrap_or_default()
    }

    pub fn receive(&mut self, round: usize, sender: usize) {
        assert!(round >= 1, "message rounds start at 1");
        if self.received.len() < round {
            self.received.resize(round, ProcessSet::EMPTY);
        }
        self.received[round - 1] = self.received[round - 1].with(sender);
    }

    /// `q(1), q(2), ..` up to the highest round with a message.
    pub fn rounds(&self) -> &[ProcessSet] {
        &self.received
    }

    pub fn contains_message(&self, m: Message) -> bool {
        self.heard(m.round).contains(m.sender.0)
    }

    pub fn advance(&mut self) {
        self.round += 1;
    }

    /// Highest round tag among received messages, 0 when none.
    pub fn max_message_round(&self) -> usize {
        self.received.len()
    }

    pub fn messages(&self) -> impl Iterator<Item = Message> + '_ {
        self.received
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |k| Message::new(i + 1, k)))
    }

    pub fn message_count(&self) -> usize {
        self.received.iter().map(|s| s.len()).sum()
    }

    /// Senders heard for the current round.
    pub fn obliv_view(&self) -> ProcessSet {
        self.heard(self.round)
    }

    /// Same round, messages restricted to rounds up to the current one.
    pub fn cons_view(&self) -> LocalState {
        let keep = self.received.len().min(self.round);
        let mut q = LocalState {
            round: self.round,
            received: self.received[..keep].to_vec(),
        };
        q.trim();
        q
    }

    /// Senders heard for the next round.
    pub fn after_view(&self) -> ProcessSet {
        self.heard(self.round + 1)
    }

    /// The per-round sender sets for rounds `1..=self.round()`.
    pub fn prefix(&self) -> Vec<ProcessSet> {
        (1..=self.round).map(|r| self.heard(r)).collect()
    }
}

impl fmt::Display for LocalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(round {}, {{", self.round)?;
        for (i, m) in self.messages().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "({}, {})", m.round, m.sender)?;
        }
        f.write_str("})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(round: usize, msgs: &[(usize, usize)]) -> LocalState {
        LocalState::from_messages(round, msgs.iter().map(|&(r, k)| Message::new(r, k)))
    }

    fn ps(idx: &[usize]) -> ProcessSet {
        ProcessSet::from_indices(idx.iter().copied())
    }

    #[test]
    fn obliv_view_examples() {
        assert_eq!(q(2, &[(2, 0), (2, 2)]).obliv_view(), ps(&[0, 2]));
        assert_eq!(q(2, &[(1, 0), (1, 1)]).obliv_view(), ProcessSet::EMPTY);
        assert_eq!(q(1, &[(1, 0), (1, 1), (1, 2)]).obliv_view(), ProcessSet::full(3));
    }

    #[test]
    fn cons_view_examples() {
        assert_eq!(q(1, &[(1, 0), (2, 1)]).cons_view(), q(1, &[(1, 0)]));
        assert_eq!(q(3, &[]).cons_view(), q(3, &[]));
    }

    #[test]
    fn after_view_examples() {
        assert_eq!(q(1, &[(2, 0), (2, 1)]).after_view(), ps(&[0, 1]));
        assert_eq!(q(1, &[(1, 0)]).after_view(), ProcessSet::EMPTY);
        assert_eq!(q(2, &[(3, 2)]).after_view(), ps(&[2]));
    }

    #[test]
    fn equality_is_extensional() {
        let mut a = q(2, &[(1, 0)]);
        a.receive(3, 1);
        let b = LocalState::from_rounds(2, &[ps(&[0]), ProcessSet::EMPTY, ps(&[1])]);
        assert_eq!(a, b);
        assert_eq!(q(1, &[]), LocalState::from_rounds(1, &[ProcessSet::EMPTY]));
    }

    fn arb_state() -> impl Strategy<Value = LocalState> {
        (1usize..5, proptest::collection::vec((1usize..6, 0usize..4), 0..12))
            .prop_map(|(round, msgs)| q(round, &msgs))
    }

    proptest! {
        #[test]
        fn cons_view_is_idempotent(s in arb_state()) {
            prop_assert_eq!(s.cons_view().cons_view(), s.cons_view());
        }

        #[test]
        fn views_agree_through_cons(s in arb_state()) {
            prop_assert_eq!(s.obliv_view(), s.cons_view().obliv_view());
            prop_assert_eq!(s.cons_view().after_view(), ProcessSet::EMPTY);
        }
    }
}
