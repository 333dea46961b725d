/* dpif.h - C API for the DPIF cross-spectrum face verification kit.
 *
 * Copyright 2026  DPIF authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *  http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * All entry points operate on an opaque session holding the resolved
 * configuration. Functions return DPIF_OK (0) on success; on failure they
 * return an error code and the session keeps a human-readable message
 * available via dpif_session_last_error().
 */

#ifndef DPIF_H
#define DPIF_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dpif_code {
  DPIF_OK = 0,
  DPIF_E_INVALID = 1,   /* bad argument or config value */
  DPIF_E_SHAPE = 2,     /* tensor/layer shape mismatch */
  DPIF_E_IO = 3,        /* file system failure */
  DPIF_E_FORMAT = 4,    /* bad magic/version/truncated/record mismatch */
  DPIF_E_NOT_FOUND = 5, /* missing record, parameter, or protocol set */
  DPIF_E_STATE = 6,     /* operation illegal in the current state */
  DPIF_E_INTERNAL = 7
} dpif_code;

typedef struct dpif_session dpif_session;

const char* dpif_version(void);

dpif_session* dpif_session_new(void);
void dpif_session_free(dpif_session* s);

/* Loads a key=value config file into the session (replacing previous
 * values key by key). */
dpif_code dpif_session_load_config(dpif_session* s, const char* path);
/* Sets one config key. Unknown keys are rejected. */
dpif_code dpif_session_set(dpif_session* s, const char* key,
                           const char* value);
/* Fully-resolved config echo. Caller frees with dpif_free. */
char* dpif_session_config_echo(dpif_session* s);
/* Message describing the last failure on this session. */
const char* dpif_session_last_error(const dpif_session* s);

/* Writes a deterministic synthetic paired-spectrum dataset (images plus
 * train/test manifests) under out_dir. */
dpif_code dpif_run_synth(dpif_session* s, const char* out_dir);

/* Two-phase training on the dataset in data_dir; writes checkpoint.dpif,
 * train_log.txt and config_echo.cfg under out_dir. resume_checkpoint may
 * be NULL. */
dpif_code dpif_run_train(dpif_session* s, const char* data_dir,
                         const char* out_dir, const char* resume_checkpoint);

/* Gallery/probe verification + identification for every probe set named
 * in the session's eval.probes, against eval.gallery. Writes score
 * matrices, ROC point lists, metric summaries and top-5 lists. */
dpif_code dpif_run_eval(dpif_session* s, const char* checkpoint,
                        const char* data_dir, const char* out_dir);

/* Score matrix export only (first probe set vs gallery). */
dpif_code dpif_run_score_matrix(dpif_session* s, const char* checkpoint,
                                const char* data_dir, const char* out_path);

/* kind: embedding | lambda | activation | truncation. grid: comma list. */
dpif_code dpif_run_ablation(dpif_session* s, const char* kind,
                            const char* grid, const char* data_dir,
                            const char* out_dir);

/* Build/version info, backbone truncation shape ledger, and trainable
 * parameter counts for the session config. Caller frees with dpif_free. */
char* dpif_info_text(dpif_session* s);

void dpif_free(char* p);

#ifdef __cplusplus
}
#endif

#endif /* DPIF_H */
