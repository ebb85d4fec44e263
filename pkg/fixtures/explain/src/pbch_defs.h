#ifndef PBCH_DEFS_H
#define PBCH_DEFS_H

extern double snr0;
extern double snr1;
extern int n_trials;
extern int N_RB_DL;
extern int band;
extern int coreset0_index;
extern int phy_cell_id;

int parse_opts(int argc, char **argv);

#endif
