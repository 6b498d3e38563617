use serde::{Deserialize, Serialize};

/// Vulnerability category of a user, from the two one-off health gates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum RiskProfile {
    High,
    Moderate,
    #[default]
    Low,
}

impl RiskProfile {
    pub const ALL: [RiskProfile; 3] = [RiskProfile::High, RiskProfile::Moderate, RiskProfile::Low];
}

/// `high_gate`: any clinically-extremely-vulnerable condition.
/// `moderate_gate`: any of the moderate-risk conditions (age 70+, pregnancy, ...).
pub fn derive_risk_profile(high_gate: bool, moderate_gate: bool) -> RiskProfile {
    if high_gate {
        RiskProfile::High
    } else if moderate_gate {
        RiskProfile::Moderate
    } else {
        RiskProfile::Low
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gates() {
        assert_eq!(derive_risk_profile(true, false), RiskProfile::High);
        assert_eq!(derive_risk_profile(true, true), RiskProfile::High);
        assert_eq!(derive_risk_profile(false, true), RiskProfile::Moderate);
        assert_eq!(derive_risk_profile(false, false), RiskProfile::Low);
    }
}
