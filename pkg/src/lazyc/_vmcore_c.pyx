# cython: language_level=3
# Compiled build of the interpreter kernel; the source is shared verbatim.
include "_vmcore.py"
