void log_line(int code) {
    char *line = malloc(80);
    line[0] = code; // BUG: line is never freed
}
