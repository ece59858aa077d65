/// Counts tokens in text. Exact per-model tokenizers plug in here; the crate
/// ships only [`ApproxTokenCounter`].
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// Approximate, tokenizer-free counter.
///
/// Each run of alphanumeric characters costs one token per started group of
/// `chars_per_token` characters; every other non-whitespace character costs
/// one token; whitespace is free. The count is deterministic and never
/// decreases when text is appended.
#[derive(Debug, Clone, Copy)]
pub struct ApproxTokenCounter {
    pub chars_per_token: usize,
}

impl Default for ApproxTokenCounter {
    fn default() -> Self {
        Self { chars_per_token: 4 }
    }
}

impl TokenCounter for ApproxTokenCounter {
    fn count(&self, text: &str) -> usize {
        let per = self.chars_per_token.max(1);
        let mut total = 0;
        let mut run = 0usize;
        for ch in text.chars() {
            if ch.is_alphanumeric() || ch == '_' {
                run += 1;
                continue;
            }
            total += run.div_ceil(per);
            run = 0;
            if !ch.is_whitespace() {
                total += 1;
            }
        }
        total + run.div_ceil(per)
    }
}

pub fn count_tokens(counter: &dyn TokenCounter, text: &str) -> usize {
    counter.count(text)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn empty_is_zero() {
        assert_eq!(count_tokens(&ApproxTokenCounter::default(), ""), 0);
        assert_eq!(count_tokens(&ApproxTokenCounter::default(), "  \n\t "), 0);
    }

    #[test]
    fn golden_sentence() {
        // Frozen from the first implementation run.
        let text = "Fit a logistic regression on the training split, then report accuracy.";
        assert_eq!(count_tokens(&ApproxTokenCounter::default(), text), 20);
    }

    proptest! {
        #[test]
        fn monotone_under_concatenation(a in "\\PC{0,40}", b in "\\PC{0,40}") {
            let c = ApproxTokenCounter::default();
            let joined = format!("{a}{b}");
            prop_assert!(c.count(&joined) >= c.count(&a).max(c.count(&b)));
        }
    }
}
