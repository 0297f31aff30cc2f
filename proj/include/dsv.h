/* C API for the dual-stream controllable video pipeline.
 *
 * Every function returns a dsv_status; on failure dsv_last_error() holds a
 * one-line reason for the calling thread. Strings returned through out
 * parameters are owned by the caller and released with dsv_string_free().
 */
#ifndef DSV_H
#define DSV_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DSV_API __declspec(dllexport)
#else
#define DSV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dsv_status {
    DSV_OK = 0,
    DSV_ERR_INVALID = 1, /* bad input, config or artifact */
    DSV_ERR_USAGE = 2,   /* malformed call */
    DSV_ERR_RUNTIME = 3  /* aborted mid-run (divergence, non-finite state) */
} dsv_status;

DSV_API const char* dsv_version(void);
DSV_API const char* dsv_last_error(void);
DSV_API void dsv_string_free(char* s);

/* Pipeline commands. config_path may be NULL for full defaults. */
DSV_API dsv_status dsv_gen_data(const char* config_path, const char* out_dir, int count,
                                uint64_t seed);
DSV_API dsv_status dsv_train(const char* data_dir, const char* config_path,
                             const char* out_dir);
DSV_API dsv_status dsv_generate(const char* checkpoint_dir, const char* condition_path,
                                const char* out_dir, int steps, int has_seed, uint64_t seed);
DSV_API dsv_status dsv_eval(const char* generated_dir, const char* data_dir,
                            const char* report_path);
DSV_API dsv_status dsv_inspect(const char* path, char** out_text);

/* Checkpoint handle: load once, sample many times. */
typedef struct dsv_checkpoint dsv_checkpoint;
DSV_API dsv_status dsv_checkpoint_open(const char* dir, dsv_checkpoint** out);
DSV_API void dsv_checkpoint_close(dsv_checkpoint* ckpt);
DSV_API int64_t dsv_checkpoint_param_count(const dsv_checkpoint* ckpt);
DSV_API dsv_status dsv_checkpoint_config_json(const dsv_checkpoint* ckpt, char** out_text);
DSV_API dsv_status dsv_checkpoint_sample(dsv_checkpoint* ckpt, const char* condition_path,
                                         const char* out_dir, int steps, int has_seed,
                                         uint64_t seed);

/* Dataset sample handle. */
typedef struct dsv_sample dsv_sample;
DSV_API dsv_status dsv_sample_open(const char* dir, dsv_sample** out);
DSV_API void dsv_sample_close(dsv_sample* sample);
DSV_API dsv_status dsv_sample_info_json(const dsv_sample* sample, char** out_text);
/* which: 0 canonical, 1 target. Buffer holds frames*height*width*3 floats. */
DSV_API dsv_status dsv_sample_clip(const dsv_sample* sample, int which, float* buffer,
                                   size_t buffer_len);

#ifdef __cplusplus
}
#endif

#endif /* DSV_H */
