/// Parses comma-separated integers and ranges: `3`, `1,4,9`, `0..10`
/// (half-open), `16..=100`, `16..=100:6`.
pub fn parse_int_list(text: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim) {
        if item.is_empty() {
            return Err(format!("empty entry in {text:?}"));
        }
        let Some((lo, rest)) = item.split_once("..") else {
            out.push(parse_u64(item)?);
            continue;
        };
        let (rest, step) = match rest.split_once(':') {
            Some((r, s)) => (r, parse_u64(s)?),
            None => (rest, 1),
        };
        if step == 0 {
            return Err(format!("zero step in {item:?}"));
        }
        let lo = parse_u64(lo)?;
        let hi = match rest.strip_prefix('=') {
            Some(h) => parse_u64(h)?.checked_add(1).ok_or_else(|| format!("{item:?} overflows"))?,
            None => parse_u64(rest)?,
        };
        if hi <= lo {
            return Err(format!("empty range {item:?}"));
        }
        out.extend((lo..hi).step_by(step as usize));
    }
    Ok(out)
}

/// Parses comma-separated floating-point values.
pub fn parse_f64_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(str::trim)
        .map(|s| s.parse::<f64>().map_err(|_| format!("{s:?} is not a number")))
        .collect()
}

fn parse_u64(s: &str) -> Result<u64, String> {
    s.trim().parse().map_err(|_| format!("{s:?} is not a non-negative integer"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_lists() {
        assert_eq!(parse_int_list("3").unwrap(), [3]);
        assert_eq!(parse_int_list("1, 4,9").unwrap(), [1, 4, 9]);
        assert_eq!(parse_int_list("0..4").unwrap(), [0, 1, 2, 3]);
        assert_eq!(parse_int_list("2..=4,10").unwrap(), [2, 3, 4, 10]);
        assert_eq!(parse_int_list("16..=34:6").unwrap(), [16, 22, 28, 34]);
        for bad in ["", "a", "1,,2", "5..5", "1..=3:0", "-1"] {
            assert!(parse_int_list(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn float_lists() {
        assert_eq!(parse_f64_list("2.5e6,5e6").unwrap(), [2.5e6, 5e6]);
        assert!(parse_f64_list("1,x").is_err());
    }
}
