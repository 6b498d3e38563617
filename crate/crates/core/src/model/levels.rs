//! Answer domains of the multiple-choice questionnaire.
//!
//! Every enumeration serializes as the answer string shown to the user, and
//! "not applicable" is a level of its own rather than a missing value.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{value}` is not a valid {domain} answer")]
pub struct ParseLevelError {
    pub domain: &'static str,
    pub value: String,
}

macro_rules! categorical {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $( #[serde(rename = $label)] $variant ),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self { $($name::$variant => $label),+ }
            }

            pub fn index(self) -> usize {
                self as usize
            }

            pub fn from_index(index: usize) -> Option<Self> {
                Self::ALL.get(index).copied()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $name {
            type Err = ParseLevelError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::ALL
                    .iter()
                    .copied()
                    .find(|level| level.label() == s)
                    .ok_or_else(|| ParseLevelError { domain: stringify!($name), value: s.to_owned() })
            }
        }
    };
}

categorical!(
    /// Whether the visit happened inside or outside.
    Setting { Indoor => "Indoor", Outdoor => "Outdoor" }
);

categorical!(
    /// People present other than the respondent.
    Crowd { None => "0", OneToFive => "1-5", FiveToTen => "5-10", ElevenPlus => "11+" }
);

categorical!(
    /// Time spent on location. "2h+" is a level of its own.
    StayLength {
        Min5 => "5",
        Min10 => "10",
        Min15 => "15",
        Min20 => "20",
        Min30 => "30",
        Min45 => "45",
        Hour1 => "1h",
        Hour2 => "2h",
        Over2Hours => "2h+",
    }
);

categorical!(YesNo { Yes => "Yes", No => "No" });

categorical!(YesNoNa { Yes => "Yes", No => "No", NotApplicable => "N/A" });

categorical!(
    PartySize { JustMe => "Just me", Two => "2", TwoToFour => "2-4", FourPlus => "4+" }
);

categorical!(
    Airflow {
        WellVentilated => "Well ventilated",
        MechanicalOnly => "No natural ventilation",
        UnknownCirculation => "Circulating from unknown source",
        Confined => "Confined space",
    }
);

categorical!(Temperature { Warm => "Warm", Normal => "Normal", Cold => "Cold" });

categorical!(
    Humidity {
        SameAsOutside => "Identical to outside",
        Dryer => "Dryer than outside",
        MoreHumid => "More humid than outside",
    }
);

categorical!(
    Cleaning { Yes => "Yes", No => "No", Often => "Often", NotApplicable => "N/A" }
);

categorical!(
    /// Outcome of the exposure, validated by a test.
    Outcome { Yes => "Yes", No => "No", Unknown => "Unknown" }
);
