/* PBCH simulation driver, trimmed to the option handling. */
#include <stdio.h>
#include <stdlib.h>
#include <unistd.h>

#include "pbch_defs.h"

double snr0 = -2.0;
double snr1 = 2.0;
int n_trials = 10;
int N_RB_DL = 106;
int band = 78;
int coreset0_index = 12;
int phy_cell_id = 0;

static void usage(void)
{
  printf("nr_pbchsim -s snr0 -S snr1 -n trials -R n_rb_dl -b band -c coreset0 -P cellid\n");
  exit(1);
}

int parse_opts(int argc, char **argv)
{
  int c;

  while ((c = getopt(argc, argv, "s:S:n:R:b:c:P:h")) != -1) {
    switch (c) {
    case 's':
      snr0 = atof(optarg);
      break;
    case 'S':
      snr1 = atof(optarg);
      break;
    case 'n':
      n_trials = atoi(optarg);
      break;
    case 'R':
      N_RB_DL = atoi(optarg);
      break;
    case 'b':
      band = atoi(optarg);
      break;
    case 'c':
      coreset0_index = atoi(optarg);
      break;
    case 'P':
      phy_cell_id = atoi(optarg);
      break;
    case 'h':
    default:
      usage();
    }
  }
  return optind;
}
