//! Plain-text output: fixed-precision number formatting and CSV tables.

use std::io::Write;

use crate::error::Result;
use crate::protocol::WorkSample;

/// Shortest `%.{digits}g`-style rendering: `digits` significant digits,
/// trailing zeros removed, exponent form outside `[1e-4, 10^digits)`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Twelve significant digits, the precision of every table this crate writes.
pub fn fmt12(x: f64) -> String {
    format_sig(x, 12)
}

/// Comma-separated rows with a header, LF line endings.
pub fn write_csv<W: Write>(out: &mut W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| fmt12(x)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Shot log with columns `shot_index,outcome,work`; the outcome is empty when
/// no measurement was made.
pub fn write_shots_csv<W: Write>(out: &mut W, samples: &[WorkSample]) -> Result<()> {
    writeln!(out, "shot_index,outcome,work")?;
    for s in samples {
        let outcome = s.outcome.map(|i| i.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{}", s.shot_index, outcome, fmt12(s.work))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_c_style_general_format() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.1875, "0.1875"),
            (-0.25, "-0.25"),
            (1.0 / 3.0, "0.333333333333"),
            (2.0 / 3.0, "0.666666666667"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (6.02214076e23, "6.02214076e+23"),
            (std::f64::consts::LN_2, "0.69314718056"),
            (999999999999.5, "1e+12"),
            (f64::NAN, "nan"),
            (f64::NEG_INFINITY, "-inf"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt12(x), want, "{x}");
        }
        assert_eq!(format_sig(1.23456, 3), "1.23");
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &["a", "b"], &[vec![1.0, 0.5], vec![-2.0, 1e-7]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n1,0.5\n-2,1e-07\n");

        let mut buf = Vec::new();
        let samples = [
            WorkSample {
                shot_index: 0,
                outcome: Some(1),
                work: 0.5,
            },
            WorkSample {
                shot_index: 1,
                outcome: None,
                work: -0.25,
            },
        ];
        write_shots_csv(&mut buf, &samples).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "shot_index,outcome,work\n0,1,0.5\n1,,-0.25\n"
        );
    }
}
