use crate::error::{Error, Result};
use crate::llm::TokenCounter;

/// How many annotations of `avg_api_tokens` fit in the context once
/// `reserved_tokens` are set aside.
pub fn estimate_api_capacity(context_tokens: u64, reserved_tokens: u64, avg_api_tokens: u64) -> Result<u64> {
    if avg_api_tokens == 0 {
        return Err(Error::Domain("average API length must be positive".into()));
    }
    if context_tokens == 0 || reserved_tokens >= context_tokens {
        return Err(Error::Domain(format!(
            "reserved tokens ({reserved_tokens}) must be below the context size ({context_tokens})"
        )));
    }
    Ok((context_tokens - reserved_tokens) / avg_api_tokens)
}

/// Mean annotation length under `counter`, rounded up so the capacity
/// estimate never overcounts.
pub fn average_tokens<S: AsRef<str>>(annotations: &[S], counter: &dyn TokenCounter) -> Result<u64> {
    if annotations.is_empty() {
        return Err(Error::Domain("annotation corpus is empty".into()));
    }
    let total: u64 = annotations.iter().map(|a| counter.count(a.as_ref()) as u64).sum();
    if total == 0 {
        return Err(Error::Domain("annotations contain no tokens".into()));
    }
    Ok(total.div_ceil(annotations.len() as u64))
}

pub fn capacity_for_corpus<S: AsRef<str>>(
    context_tokens: u64,
    reserved_tokens: u64,
    annotations: &[S],
    counter: &dyn TokenCounter,
) -> Result<u64> {
    estimate_api_capacity(context_tokens, reserved_tokens, average_tokens(annotations, counter)?)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::llm::ApproxTokenCounter;

    #[test]
    fn boundary_cases() {
        assert_eq!(estimate_api_capacity(1000, 200, 40).unwrap(), 20);
        assert_eq!(estimate_api_capacity(1000, 200, 801).unwrap(), 0);
        assert_eq!(estimate_api_capacity(1000, 200, 800).unwrap(), 1);
        assert_eq!(estimate_api_capacity(1000, 200, 41).unwrap(), 19);
        assert_eq!(estimate_api_capacity(1000, 0, 1).unwrap(), 1000);
        assert!(matches!(estimate_api_capacity(1000, 200, 0), Err(Error::Domain(_))));
        assert!(estimate_api_capacity(1000, 1000, 5).is_err());
        assert!(estimate_api_capacity(0, 0, 5).is_err());
    }

    #[test]
    fn average_rounds_up() {
        let c = ApproxTokenCounter::default();
        // 1 and 2 tokens: mean 1.5 -> 2
        assert_eq!(average_tokens(&["abcd", "abcd efgh"], &c).unwrap(), 2);
        assert!(average_tokens::<&str>(&[], &c).is_err());
        assert!(average_tokens(&["   "], &c).is_err());
    }

    proptest! {
        #[test]
        fn monotone(ctx in 1u64..100_000, res_frac in 0.0f64..1.0, a in 1u64..5000, b in 1u64..5000, extra in 0u64..10_000) {
            let res = ((ctx as f64) * res_frac) as u64 % ctx;
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(estimate_api_capacity(ctx, res, hi).unwrap() <= estimate_api_capacity(ctx, res, lo).unwrap());
            prop_assert!(estimate_api_capacity(ctx + extra, res, lo).unwrap() >= estimate_api_capacity(ctx, res, lo).unwrap());
        }
    }
}
