//! The closed vocabulary of gap types and their repair actions.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Verdict category for a single reasoning step.
///
/// The set is closed: every checker variant, reward table, and metric in this
/// crate consumes exactly these four values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapType {
    /// The step's claim is fine as far as the evidence goes.
    NoGap,
    /// Contradicted claim: retrieved evidence actively refutes the claim.
    ContradictedClaim,
    /// Irrelevant evidence: nothing retrieved addresses the entity or
    /// relation the step needs.
    IrrelevantEvidence,
    /// Missing bridge: evidence is on-entity and relevant but an inferential
    /// hop is unstated.
    MissingBridge,
}

impl GapType {
    /// True for the three gap categories, false for `NoGap`.
    pub fn is_gap(self) -> bool {
        !matches!(self, GapType::NoGap)
    }

    /// The repair a policy is rewarded for taking after this verdict.
    pub fn repair_action(self) -> RepairAction {
        match self {
            GapType::NoGap => RepairAction::None,
            GapType::ContradictedClaim => RepairAction::Retract,
            GapType::IrrelevantEvidence => RepairAction::ReSearch,
            GapType::MissingBridge => RepairAction::BridgingSearch,
        }
    }

    /// Short display code used in tables and reports.
    pub fn code(self) -> &'static str {
        match self {
            GapType::NoGap => "no_gap",
            GapType::ContradictedClaim => "cc",
            GapType::IrrelevantEvidence => "ie",
            GapType::MissingBridge => "mb",
        }
    }

    /// All four categories in reporting order.
    pub const ALL: [GapType; 4] = [
        GapType::NoGap,
        GapType::ContradictedClaim,
        GapType::IrrelevantEvidence,
        GapType::MissingBridge,
    ];
}

impl fmt::Display for GapType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Recommended follow-up action attached to every verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairAction {
    /// No action: the step stands.
    None,
    /// Withdraw the contradicted claim before proceeding.
    Retract,
    /// Re-issue a search with a reformulated query.
    ReSearch,
    /// Search specifically for the unstated connecting fact.
    BridgingSearch,
}

impl fmt::Display for RepairAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RepairAction::None => "none",
            RepairAction::Retract => "retract",
            RepairAction::ReSearch => "re_search",
            RepairAction::BridgingSearch => "bridging_search",
        };
        f.write_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repair_mapping_is_fixed() {
        assert_eq!(GapType::NoGap.repair_action(), RepairAction::None);
        assert_eq!(GapType::ContradictedClaim.repair_action(), RepairAction::Retract);
        assert_eq!(GapType::IrrelevantEvidence.repair_action(), RepairAction::ReSearch);
        assert_eq!(GapType::MissingBridge.repair_action(), RepairAction::BridgingSearch);
    }

    #[test]
    fn serde_codes_are_stable() {
        let json = serde_json::to_string(&GapType::MissingBridge).unwrap();
        assert_eq!(json, "\"missing_bridge\"");
        let back: GapType = serde_json::from_str("\"contradicted_claim\"").unwrap();
        assert_eq!(back, GapType::ContradictedClaim);
    }

    #[test]
    fn only_no_gap_is_not_a_gap() {
        let gaps: Vec<_> = GapType::ALL.iter().filter(|t| t.is_gap()).collect();
        assert_eq!(gaps.len(), 3);
        assert!(!GapType::NoGap.is_gap());
    }
}
