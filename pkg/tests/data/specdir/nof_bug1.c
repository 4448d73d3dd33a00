void drop_last(char *s, int n) {
    int at = n - 1;
    s[at] = 0; // BUG: at is negative when n == 0
}
