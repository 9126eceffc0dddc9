void report(int n, int parity);
