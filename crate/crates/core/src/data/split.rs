use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Split> {
        Split::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::usage(format!("unknown split {s:?} (expected train, validation or test)")))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// What a split rule keys on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKey {
    Subject,
    Trial,
}

/// Held-out validation and test members; everything else trains. There is
/// deliberately no random-ratio variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub key: SplitKey,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl SplitSpec {
    pub fn new(key: SplitKey, validation: &[&str], test: &[&str]) -> Result<Self> {
        if let Some(both) = validation.iter().find(|v| test.contains(v)) {
            return Err(Error::config(format!("{both} is in both the validation and the test split")));
        }
        Ok(SplitSpec {
            key,
            validation: validation.iter().map(|s| s.to_string()).collect(),
            test: test.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn assign(&self, subject: &str, trial: &str) -> Split {
        let id = match self.key {
            SplitKey::Subject => subject,
            SplitKey::Trial => trial,
        };
        if self.test.iter().any(|t| t == id) {
            Split::Test
        } else if self.validation.iter().any(|v| v == id) {
            Split::Validation
        } else {
            Split::Train
        }
    }
}
