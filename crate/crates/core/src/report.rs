//! Check outcome plumbing shared by the axiom checkers and suite runner.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "detail")]
pub enum Status {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail(String),
    #[serde(rename = "window-limited")]
    WindowLimited(String),
    #[serde(rename = "unsupported")]
    Unsupported(String),
}

impl Status {
    pub fn passed(&self) -> bool {
        matches!(self, Status::Pass)
    }

    pub fn failed(&self) -> bool {
        matches!(self, Status::Fail(_))
    }

    pub fn from_result(r: Result<(), String>) -> Self {
        match r {
            Ok(()) => Status::Pass,
            Err(w) => Status::Fail(w),
        }
    }
}

/// One named check with its outcome and the window it was decided on.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub id: String,
    #[serde(flatten)]
    pub status: Status,
    pub window: String,
}

impl Check {
    pub fn new(id: impl Into<String>, status: Status, window: impl Into<String>) -> Self {
        Check {
            id: id.into(),
            status,
            window: window.into(),
        }
    }

    pub fn pass(id: impl Into<String>, window: impl Into<String>) -> Self {
        Check::new(id, Status::Pass, window)
    }
}
