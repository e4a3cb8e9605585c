//! Label enumerations shared across the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trip purpose. Exactly four values; the order here fixes class indices and
/// the one-hot layout everywhere (Work, Home, S&E, Medical).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Work,
    Home,
    /// Shopping & entertainment.
    Se,
    Medical,
}

impl Purpose {
    pub const ALL: [Purpose; 4] = [Purpose::Work, Purpose::Home, Purpose::Se, Purpose::Medical];

    pub fn index(self) -> usize {
        match self {
            Purpose::Work => 0,
            Purpose::Home => 1,
            Purpose::Se => 2,
            Purpose::Medical => 3,
        }
    }

    pub fn from_index(idx: usize) -> Option<Purpose> {
        Purpose::ALL.get(idx).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Purpose::Work => "work",
            Purpose::Home => "home",
            Purpose::Se => "se",
            Purpose::Medical => "medical",
        }
    }

    pub fn parse(raw: &str) -> Result<Purpose> {
        match raw.trim() {
            "work" => Ok(Purpose::Work),
            "home" => Ok(Purpose::Home),
            "se" => Ok(Purpose::Se),
            "medical" => Ok(Purpose::Medical),
            other => Err(Error::InvalidData(format!("unknown purpose '{other}'"))),
        }
    }
}

/// Age band of a rider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeBand {
    Under20,
    From20To59,
    Over60,
}

impl AgeBand {
    pub const ALL: [AgeBand; 3] = [AgeBand::Under20, AgeBand::From20To59, AgeBand::Over60];

    pub fn index(self) -> usize {
        match self {
            AgeBand::Under20 => 0,
            AgeBand::From20To59 => 1,
            AgeBand::Over60 => 2,
        }
    }

    pub fn from_index(idx: usize) -> Option<AgeBand> {
        AgeBand::ALL.get(idx).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgeBand::Under20 => "<20",
            AgeBand::From20To59 => "20-59",
            AgeBand::Over60 => ">=60",
        }
    }

    pub fn parse(raw: &str) -> Result<AgeBand> {
        match raw.trim() {
            "<20" => Ok(AgeBand::Under20),
            "20-59" => Ok(AgeBand::From20To59),
            ">=60" => Ok(AgeBand::Over60),
            other => Err(Error::InvalidData(format!("unknown age band '{other}'"))),
        }
    }
}

/// Employment status of a rider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    WithJob,
    Student,
    RetiredNoJob,
}

impl JobStatus {
    pub const ALL: [JobStatus; 3] = [JobStatus::WithJob, JobStatus::Student, JobStatus::RetiredNoJob];

    pub fn index(self) -> usize {
        match self {
            JobStatus::WithJob => 0,
            JobStatus::Student => 1,
            JobStatus::RetiredNoJob => 2,
        }
    }

    pub fn from_index(idx: usize) -> Option<JobStatus> {
        JobStatus::ALL.get(idx).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JobStatus::WithJob => "with_job",
            JobStatus::Student => "student",
            JobStatus::RetiredNoJob => "retired_nojob",
        }
    }

    pub fn parse(raw: &str) -> Result<JobStatus> {
        match raw.trim() {
            "with_job" => Ok(JobStatus::WithJob),
            "student" => Ok(JobStatus::Student),
            "retired_nojob" => Ok(JobStatus::RetiredNoJob),
            other => Err(Error::InvalidData(format!("unknown job status '{other}'"))),
        }
    }
}

/// Monthly income band (tens of thousands of currency units).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncomeBand {
    Zero,
    ZeroTo10,
    TenTo15,
    Over15,
}

impl IncomeBand {
    pub const ALL: [IncomeBand; 4] = [
        IncomeBand::Zero,
        IncomeBand::ZeroTo10,
        IncomeBand::TenTo15,
        IncomeBand::Over15,
    ];

    pub fn index(self) -> usize {
        match self {
            IncomeBand::Zero => 0,
            IncomeBand::ZeroTo10 => 1,
            IncomeBand::TenTo15 => 2,
            IncomeBand::Over15 => 3,
        }
    }

    pub fn from_index(idx: usize) -> Option<IncomeBand> {
        IncomeBand::ALL.get(idx).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IncomeBand::Zero => "0",
            IncomeBand::ZeroTo10 => "0-10",
            IncomeBand::TenTo15 => "10-15",
            IncomeBand::Over15 => ">=15",
        }
    }

    pub fn parse(raw: &str) -> Result<IncomeBand> {
        match raw.trim() {
            "0" => Ok(IncomeBand::Zero),
            "0-10" => Ok(IncomeBand::ZeroTo10),
            "10-15" => Ok(IncomeBand::TenTo15),
            ">=15" => Ok(IncomeBand::Over15),
            other => Err(Error::InvalidData(format!("unknown income band '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }

    pub fn parse(raw: &str) -> Result<Gender> {
        match raw.trim() {
            "male" => Ok(Gender::Male),
            "female" => Ok(Gender::Female),
            other => Err(Error::InvalidData(format!("unknown gender '{other}'"))),
        }
    }
}

/// The three inferred socio-economic attributes of one rider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocioAttributes {
    pub age_band: AgeBand,
    pub job_status: JobStatus,
    pub income_band: IncomeBand,
}
