use super::CostError;

/// Time saved by accelerating the merged function instead of the better of
/// its two parents alone, as a fraction of the whole application's runtime.
pub fn estimate_profitability(sw1: f64, sw2: f64, hw1: f64, hw2: f64, hw12: f64, total: f64) -> Result<f64, CostError> {
    if !(total > 0.0) {
        return Err(CostError::NonPositiveTotal(total));
    }
    let best_single = (sw1 - hw1).max(sw2 - hw2);
    Ok((sw1 + sw2 - hw12 - best_single) / total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        let ep = estimate_profitability(100.0, 50.0, 40.0, 20.0, 70.0, 1000.0).unwrap();
        assert!((ep - 0.02).abs() < 1e-12);
        let swapped = estimate_profitability(50.0, 100.0, 20.0, 40.0, 70.0, 1000.0).unwrap();
        assert_eq!(ep, swapped);
        // merged as slow as best parent plus the other parent in software
        let ep0 = estimate_profitability(100.0, 50.0, 40.0, 20.0, 40.0 + 50.0, 1000.0).unwrap();
        assert!(ep0.abs() < 1e-15);
        assert!(estimate_profitability(1.0, 1.0, 0.0, 0.0, 0.0, 0.0).is_err());
    }
}
