use thiserror::Error;

use super::{Intent, IntentState, StateChange};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("illegal transition {from} -> {to}")]
pub struct IllegalTransition {
    pub from: IntentState,
    pub to: IntentState,
}

impl IntentState {
    /// The legal transition relation. WITHDRAWN has no exits.
    pub fn can_transition_to(self, next: IntentState) -> bool {
        use IntentState::*;
        matches!(
            (self, next),
            (Submitted, Compiling)
                | (Compiling, Installing | Failed)
                | (Installing, Installed | Failed)
                | (Installed, Recompiling | Withdrawing)
                | (Recompiling, Installing | Failed)
                | (Failed, Compiling | Withdrawing)
                | (Withdrawing, Withdrawn)
        )
    }
}

impl Intent {
    pub fn transition(
        &mut self,
        next: IntentState,
        reason: impl Into<String>,
    ) -> Result<(), IllegalTransition> {
        if !self.state.can_transition_to(next) {
            return Err(IllegalTransition {
                from: self.state,
                to: next,
            });
        }
        let sequence = self.state_history.last().map_or(0, |c| c.sequence + 1);
        self.state = next;
        self.state_history.push(StateChange {
            state: next,
            sequence,
            reason: reason.into(),
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::intent::{EncryptionConstraint, IntentAction};

    fn fresh() -> Intent {
        Intent {
            id: "intent-000001".into(),
            action: IntentAction::Connect,
            src: "A1".into(),
            dst: "B1".into(),
            bandwidth_mbps: 10,
            max_latency_ms: None,
            encryption: EncryptionConstraint::none(),
            state: IntentState::Submitted,
            state_history: vec![StateChange {
                state: IntentState::Submitted,
                sequence: 0,
                reason: "submitted".into(),
            }],
        }
    }

    #[test]
    fn first_edge() {
        let mut i = fresh();
        i.transition(IntentState::Compiling, "compile").unwrap();
        assert_eq!(i.state, IntentState::Compiling);
        assert_eq!(i.state_history.last().unwrap().sequence, 1);
    }

    #[test]
    fn installed_cannot_skip_withdrawing() {
        let mut i = fresh();
        for s in [IntentState::Compiling, IntentState::Installing, IntentState::Installed] {
            i.transition(s, "").unwrap();
        }
        let err = i.transition(IntentState::Withdrawn, "").unwrap_err();
        assert_eq!(err.from, IntentState::Installed);
        assert_eq!(err.to, IntentState::Withdrawn);
        assert!(err.to_string().contains("INSTALLED"));
        assert!(err.to_string().contains("WITHDRAWN"));
    }

    #[test]
    fn failed_retry() {
        let mut i = fresh();
        i.transition(IntentState::Compiling, "").unwrap();
        i.transition(IntentState::Failed, "no path").unwrap();
        assert_eq!(i.failure_reason(), Some("no path"));
        i.transition(IntentState::Compiling, "operator retry").unwrap();
        assert_eq!(i.state_history.last().unwrap().reason, "operator retry");
    }

    #[test]
    fn withdrawn_is_terminal() {
        for s in IntentState::ALL {
            assert!(!IntentState::Withdrawn.can_transition_to(s));
        }
    }

    proptest! {
        #[test]
        fn history_only_holds_legal_edges(attempts in proptest::collection::vec(0usize..8, 0..64)) {
            let mut i = fresh();
            for a in attempts {
                let _ = i.transition(IntentState::ALL[a], "random");
            }
            for w in i.state_history.windows(2) {
                prop_assert!(w[0].state.can_transition_to(w[1].state));
                prop_assert!(w[0].sequence < w[1].sequence);
            }
            prop_assert_eq!(i.state, i.state_history.last().unwrap().state);
        }
    }
}
