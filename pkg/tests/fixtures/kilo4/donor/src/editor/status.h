#ifndef STATUS_H
#define STATUS_H

int status_line(const char *filename, int numrows, int dirty, int width);

#endif
