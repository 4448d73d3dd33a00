int probe_block(int id) {
    if (id < 0) {
        return -1;
    }
    return id * 2;
}
