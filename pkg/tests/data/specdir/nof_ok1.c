void drop_last_checked(char *s, int n) {
    if (n > 0) {
        int at = n - 1;
        s[at] = 0;
    }
}
