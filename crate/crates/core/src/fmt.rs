//! Decimal rendering used by every CSV and text emitter.

/// Renders `x` with at most `sig` significant digits in plain decimal notation,
/// switching to exponent notation for very large or very small magnitudes.
/// Trailing zeros are trimmed, so `1.5` prints as `1.5` and `2.0` as `2`.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };

    if !(-7..16).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        let mut s = String::new();
        if negative {
            s.push('-');
        }
        s.push_str(head);
        if !tail.is_empty() {
            s.push('.');
            s.push_str(tail);
        }
        s.push('e');
        s.push_str(&exp.to_string());
        return s;
    }

    let mut s = String::new();
    if negative {
        s.push('-');
    }
    if exp < 0 {
        s.push_str("0.");
        for _ in 0..(-exp - 1) {
            s.push('0');
        }
        s.push_str(digits);
    } else {
        let int_len = exp as usize + 1;
        if digits.len() <= int_len {
            s.push_str(digits);
            for _ in digits.len()..int_len {
                s.push('0');
            }
        } else {
            s.push_str(&digits[..int_len]);
            s.push('.');
            s.push_str(&digits[int_len..]);
        }
    }
    s
}

/// Twelve significant digits, the precision every emitted table uses.
pub fn fmt12(x: f64) -> String {
    format_sig(x, 12)
}
