use sha2::{Digest, Sha256};

use super::list_images;
use crate::error::{CliError, Result};
use crate::output::Staging;
use crate::SplitArgs;

pub fn run(args: &SplitArgs) -> Result<()> {
    let (train, test) = parse_ratio(&args.split)?;
    let names = list_images(&args.input)?;
    if names.is_empty() {
        return Err(CliError::validation(format!("no images in {}", args.input.display())));
    }
    let (train_set, test_set) = split(&names, train, test, args.seed);
    let mut staging = Staging::new();
    staging.write(args.out.join("train.txt"), lines(&train_set).as_bytes())?;
    staging.write(args.out.join("test.txt"), lines(&test_set).as_bytes())?;
    staging.commit()?;
    println!("train: {} test: {}", train_set.len(), test_set.len());
    Ok(())
}

fn parse_ratio(text: &str) -> Result<(u32, u32)> {
    let bad = || CliError::validation(format!("split '{text}' must look like 90/10"));
    let (a, b) = text.split_once('/').ok_or_else(bad)?;
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    if a + b == 0 {
        return Err(bad());
    }
    Ok((a, b))
}

/// Orders names by a seeded hash and assigns the first
/// `round(n * test / (train + test))` to the test set. Both lists come back sorted.
pub fn split(names: &[String], train: u32, test: u32, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut keyed: Vec<([u8; 32], &String)> = names
        .iter()
        .map(|n| {
            let mut h = Sha256::new();
            h.update(seed.to_le_bytes());
            h.update(n.as_bytes());
            (h.finalize().into(), n)
        })
        .collect();
    keyed.sort();
    let n_test = ((names.len() as f64) * f64::from(test) / f64::from(train + test)).round() as usize;
    let mut test_set: Vec<String> = keyed[..n_test].iter().map(|(_, n)| (*n).clone()).collect();
    let mut train_set: Vec<String> = keyed[n_test..].iter().map(|(_, n)| (*n).clone()).collect();
    test_set.sort();
    train_set.sort();
    (train_set, test_set)
}

fn lines(names: &[String]) -> String {
    names.iter().map(|n| format!("{n}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("img_{i:04}.png")).collect()
    }

    #[test]
    fn ninety_ten_counts() {
        let (train, test) = split(&names(100), 90, 10, 0);
        assert_eq!((train.len(), test.len()), (90, 10));
        let (train, test) = split(&names(7), 90, 10, 0);
        assert_eq!((train.len(), test.len()), (6, 1));
    }

    #[test]
    fn deterministic_disjoint_and_seeded() {
        let all = names(50);
        let a = split(&all, 90, 10, 3);
        assert_eq!(a, split(&all, 90, 10, 3));
        assert_ne!(a.1, split(&all, 90, 10, 4).1);
        let mut joined: Vec<String> = a.0.iter().chain(&a.1).cloned().collect();
        joined.sort();
        assert_eq!(joined, all);
    }

    #[test]
    fn input_order_does_not_matter() {
        let all = names(30);
        let mut rev = all.clone();
        rev.reverse();
        assert_eq!(split(&all, 90, 10, 1), split(&rev, 90, 10, 1));
    }

    #[test]
    fn ratio_parsing() {
        assert_eq!(parse_ratio("90/10").unwrap(), (90, 10));
        assert!(parse_ratio("90").is_err());
        assert!(parse_ratio("0/0").is_err());
        assert!(parse_ratio("a/b").is_err());
    }
}
