//! Batch pipeline over the `markup-did` library: configuration, stage
//! execution, subsample filters and the results dashboard.

pub mod config;
pub mod filters;
pub mod pipeline;
pub mod report;

use markup_did::Error;

/// Process exit code for an error chain: 2 for configuration problems,
/// 3 for bad or missing data, 4 for estimation failures.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config(_) => 2,
                Error::Estimation(_) | Error::Inference(_) | Error::Aggregation(_) | Error::Classification(_) => 4,
                _ => 3,
            };
        }
    }
    1
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn codes_follow_the_error_kind() {
        let wrap = |e: Error| Err::<(), _>(e).context("stage did failed").unwrap_err();
        assert_eq!(exit_code(&wrap(Error::Config("x".into()))), 2);
        assert_eq!(exit_code(&wrap(Error::Schema("x".into()))), 3);
        assert_eq!(exit_code(&wrap(Error::Estimation("x".into()))), 4);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), 1);
    }
}
