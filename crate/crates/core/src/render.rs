/// Renders a value rounded to four decimals (ties to even), then drops
/// trailing zeros while keeping at least one decimal: `0.0`, `0.5`, `0.6667`.
pub fn decimal4(value: f64) -> String {
    let mut s = format!("{value:.4}");
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    s
}
