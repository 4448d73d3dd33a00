int scale_down(int v) {
    int unit = 0;
    return v / unit; // BUG: unit is literally zero
}
