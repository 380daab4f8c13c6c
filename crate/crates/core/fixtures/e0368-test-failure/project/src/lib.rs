pub fn get_value() -> f64 {
  let mut val: f64 = 7.0;
  val <<= 2.0;
  val
}
