pub fn double(x: i32) -> i32 {
    return x * 2;
}

pub fn nothing_in(items: &[u8]) -> bool {
    items.len() == 0
}

pub fn label(flag: bool) -> &'static str {
    if flag == true {
        "on"
    } else {
        "off"
    }
}
