"""Unary transformation table for the 20 extended double-cross regions.

For a region of AB:C, the three columns give the possible regions of BC:A
(left shift), CA:B (right shift), and BA:C (inverse). The inverse column is
always a singleton; four rows are two-valued under the cyclic shifts. This
table doubles as the anchor used to pin the region numbering during the
labeling bootstrap.
"""

# region: (left image, right image, inverse)
UNARY_ROWS = {
    1: ((17,), (7,), 20),
    2: ((18,), (8,), 19),
    3: ((19,), (13,), 18),
    4: ((20,), (14,), 17),
    5: ((12,), (7,), 16),
    6: ((11,), (13,), 15),
    7: ((1, 5), (12, 17), 14),
    8: ((2, 10), (15, 18), 13),
    9: ((16,), (14,), 12),
    10: ((15,), (8,), 11),
    11: ((13,), (6,), 10),
    12: ((7,), (5,), 9),
    13: ((3, 6), (11, 19), 8),
    14: ((4, 9), (16, 20), 7),
    15: ((8,), (10,), 6),
    16: ((14,), (9,), 5),
    17: ((7,), (1,), 4),
    18: ((8,), (2,), 3),
    19: ((13,), (3,), 2),
    20: ((14,), (4,), 1),
}
