//! File formats, run configuration and subcommands behind the `sparserec`
//! binary.

pub mod bundle;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use bundle::ModelBundle;
pub use config::{PcaSetting, ProtocolSetting, RunConfig};
pub use error::{CliError, CliResult};
pub use formats::{FeatureFile, FeatureLayout, FormatError};

/// Parses a K list: comma-separated values and `start..end:step` ranges
/// (inclusive), e.g. `10..100:10` or `5,10,20..40:10`.
pub fn parse_k_list(s: &str) -> Result<Vec<usize>, String> {
    let mut ks = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}` in K list: {e}"));
        match part.split_once("..") {
            None => ks.push(num(part)?),
            Some((start, rest)) => {
                let (end, step) = rest.split_once(':').unwrap_or((rest, "1"));
                let (start, end, step) = (num(start)?, num(end)?, num(step)?);
                if step == 0 || start > end {
                    return Err(format!("range `{part}` must have start <= end and step > 0"));
                }
                ks.extend((start..=end).step_by(step));
            }
        }
    }
    if ks.is_empty() {
        return Err("empty K list".into());
    }
    if ks.contains(&0) {
        return Err("K values must be positive".into());
    }
    Ok(ks)
}

/// Parses an `n1xn2xn` tensor shape.
pub fn parse_tensor_shape(s: &str) -> Result<(usize, usize, usize), String> {
    let dims = s
        .split('x')
        .map(|d| d.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| format!("tensor shape `{s}`: {e}"))?;
    match dims[..] {
        [n1, n2, n] if n1 > 0 && n2 > 0 && n > 0 => Ok((n1, n2, n)),
        _ => Err(format!("tensor shape `{s}`: expected three positive sizes like 14x14x512")),
    }
}
